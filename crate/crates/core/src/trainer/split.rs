use std::collections::BTreeMap;

use crate::da::corpus::Example;
use crate::da::CanonicalDa;
use crate::numkit::Rng;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SplitCorpus {
    pub train: Vec<Example>,
    pub valid: Vec<Example>,
    pub test: Vec<Example>,
}

impl SplitCorpus {
    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> impl Iterator<Item = &Example> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }
}

fn groups(examples: Vec<Example>) -> Vec<Vec<Example>> {
    let mut by_da: BTreeMap<CanonicalDa, Vec<Example>> = BTreeMap::new();
    for ex in examples {
        by_da.entry(ex.da.canonical()).or_default().push(ex);
    }
    by_da.into_values().collect()
}

/// Splits 3:1:1 with every canonical-DA group kept whole, so no
/// delexicalised form is shared between splits. Groups are placed largest
/// first (ties in seeded random order), each into the split currently
/// furthest below its share.
pub fn split_3_1_1(examples: Vec<Example>, rng: &mut Rng) -> SplitCorpus {
    let total = examples.len() as f64;
    let mut gs = groups(examples);
    rng.shuffle(&mut gs);
    gs.sort_by_key(|g| std::cmp::Reverse(g.len()));

    let shares = [0.6, 0.2, 0.2];
    let mut parts: [Vec<Example>; 3] = Default::default();
    for g in gs {
        let deficit = |i: usize, parts: &[Vec<Example>; 3]| shares[i] * total - parts[i].len() as f64;
        let mut best = 0;
        for i in 1..3 {
            if deficit(i, &parts) > deficit(best, &parts) {
                best = i;
            }
        }
        parts[best].extend(g);
    }
    let [train, valid, test] = parts;
    SplitCorpus { train, valid, test }
}

/// Median of the group sizes, rounded up.
fn median_size(mut sizes: Vec<usize>) -> usize {
    if sizes.is_empty() {
        return 0;
    }
    sizes.sort_unstable();
    let n = sizes.len();
    if n % 2 == 1 {
        sizes[n / 2]
    } else {
        (sizes[n / 2 - 1] + sizes[n / 2]).div_ceil(2)
    }
}

/// Replicates the examples of every canonical-DA group smaller than the
/// median group size until it reaches that size. Nothing is removed;
/// original order is kept and copies are appended per group.
pub fn upsample(train: &[Example]) -> Vec<Example> {
    let mut by_da: BTreeMap<CanonicalDa, Vec<&Example>> = BTreeMap::new();
    for ex in train {
        by_da.entry(ex.da.canonical()).or_default().push(ex);
    }
    let target = median_size(by_da.values().map(Vec::len).collect());
    let mut out = train.to_vec();
    for members in by_da.values() {
        for k in members.len()..target {
            out.push(members[k % members.len()].clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::da::{DelexUtterance, DialogueAct, SlotValue};

    fn ex(act: &str, slots: &[&str], text: &str) -> Example {
        let mut da = DialogueAct::new(act);
        for s in slots {
            da = da.with(*s, SlotValue::Requested);
        }
        Example {
            da,
            text: text.into(),
            delex: DelexUtterance::from_body(text.split(' ')),
        }
    }

    fn counts(v: &[Example]) -> BTreeMap<CanonicalDa, usize> {
        let mut m = BTreeMap::new();
        for e in v {
            *m.entry(e.da.canonical()).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn median_rule() {
        let mut train: Vec<Example> = vec![ex("request", &["area"], "where")];
        train.extend((0..9).map(|i| ex("request", &["food"], &format!("what food {i}"))));
        let up = upsample(&train);
        let c = counts(&up);
        assert_eq!(c.values().copied().collect::<Vec<_>>(), vec![5, 9]);
    }

    #[test]
    fn equal_groups_unchanged() {
        let train = vec![ex("goodbye", &[], "bye"), ex("reqmore", &[], "more")];
        assert_eq!(upsample(&train), train);
    }

    #[test]
    fn split_keeps_groups_whole_and_ratio() {
        let mut all = Vec::new();
        for g in 0..40 {
            let slot = ["area", "food", "name", "phone", "address"][g % 5];
            let act = ["request", "select", "inform"][g / 5 % 3];
            let slots: Vec<&str> = if act == "inform" { vec![] } else { vec![slot] };
            for i in 0..(1 + g % 7) {
                all.push(ex(act, &slots, &format!("u{g} {i}")));
            }
        }
        let n = all.len();
        let split = split_3_1_1(all, &mut Rng::seed(3));
        assert_eq!(split.len(), n);
        let (tr, va, te) = (counts(&split.train), counts(&split.valid), counts(&split.test));
        for k in tr.keys() {
            assert!(!va.contains_key(k) && !te.contains_key(k));
        }
        for k in va.keys() {
            assert!(!te.contains_key(k));
        }
        let frac = split.train.len() as f64 / n as f64;
        assert!((frac - 0.6).abs() < 0.1, "{frac}");
    }

    #[test]
    fn split_is_seeded() {
        let make = || (0..30).map(|i| ex("request", &[["area", "food", "name"][i % 3]], &format!("x {i}"))).collect::<Vec<_>>();
        assert_eq!(split_3_1_1(make(), &mut Rng::seed(1)), split_3_1_1(make(), &mut Rng::seed(1)));
    }
}
