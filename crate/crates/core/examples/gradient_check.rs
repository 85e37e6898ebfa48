//! Compares backpropagated gradients with central differences on small
//! random networks in every gating mode, at depth one and two.
//!
//! cargo run --example gradient_check -- [seed]

use sclstm::net::gradcheck::{gradcheck, GradcheckConfig};
use sclstm::numkit::Rng;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let report = gradcheck(&GradcheckConfig::default(), &mut Rng::seed(seed));
    println!("{report}");
    if !report.passed() {
        std::process::exit(1);
    }
}
