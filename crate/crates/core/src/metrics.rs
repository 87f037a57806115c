//! Confusion matrices and the imbalance-aware metric suite.
//!
//! Zero-denominator precision, recall and F1 are 0. Classes with neither
//! support nor predictions are left out of macro averages and the fairness
//! gap; classes with support but no hits count as 0.

use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassLabel, ClassRegistry};

/// Counts indexed `(gold, predicted)` in class order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: Vec<ClassLabel>,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(registry: &ClassRegistry) -> Self {
        Self::zeros(registry.classes().to_vec())
    }

    fn zeros(classes: Vec<ClassLabel>) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![0; k * k],
        }
    }

    /// Builds a matrix from rows of counts.
    pub fn from_rows(registry: &ClassRegistry, rows: &[Vec<u64>]) -> Result<Self> {
        let k = registry.len();
        if rows.len() != k || rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvariantViolation(format!(
                "confusion matrix must be {k}x{k}"
            )));
        }
        Ok(ConfusionMatrix {
            classes: registry.classes().to_vec(),
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> &[ClassLabel] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn get(&self, gold: usize, predicted: usize) -> u64 {
        self.counts[gold * self.len() + predicted]
    }

    pub fn add(&mut self, gold: usize, predicted: usize) {
        let k = self.len();
        self.counts[gold * k + predicted] += 1;
    }

    /// Adds another shard's counts. Both must share the class order.
    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(
            self.classes, other.classes,
            "merging matrices over different classes"
        );
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.len()).map(|i| self.get(i, i)).sum()
    }

    pub fn row_sum(&self, gold: usize) -> u64 {
        (0..self.len()).map(|p| self.get(gold, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.len()).map(|g| self.get(g, predicted)).sum()
    }

    /// Relabels both axes through `map`; the new class set is the image of
    /// the map in registry order.
    pub fn relabel(
        &self,
        registry: &ClassRegistry,
        map: &LenientMap,
    ) -> Result<(ConfusionMatrix, Vec<bool>)> {
        map.validate(registry)?;
        let target: Vec<usize> = (0..self.len())
            .map(|i| {
                let to = map.apply(&self.classes[i]);
                registry.index_of(to.as_str()).expect("validated")
            })
            .collect();
        let mut image: Vec<usize> = target.clone();
        image.sort_unstable();
        image.dedup();
        let position = |c: usize| image.binary_search(&c).expect("in image");
        let mut out =
            ConfusionMatrix::zeros(image.iter().map(|&c| registry.label(c).clone()).collect());
        for g in 0..self.len() {
            for p in 0..self.len() {
                let n = self.get(g, p);
                if n > 0 {
                    let k = out.len();
                    out.counts[position(target[g]) * k + position(target[p])] += n;
                }
            }
        }
        let minority = image.iter().map(|&c| registry.is_minority(c)).collect();
        Ok((out, minority))
    }
}

/// Tallies `(gold, predicted)` pairs.
pub fn confusion(
    pairs: &[(ClassLabel, ClassLabel)],
    registry: &ClassRegistry,
) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::new(registry);
    for (g, p) in pairs {
        let gi = registry
            .index_of(g.as_str())
            .ok_or_else(|| Error::UnknownLabel(g.to_string()))?;
        let pi = registry
            .index_of(p.as_str())
            .ok_or_else(|| Error::UnknownLabel(p.to_string()))?;
        m.add(gi, pi);
    }
    Ok(m)
}

/// Class merges applied before lenient scoring. Unlisted classes map to themselves.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LenientMap(pub IndexMap<ClassLabel, ClassLabel>);

impl LenientMap {
    pub fn identity() -> Self {
        LenientMap::default()
    }

    /// Merges a lone minority class of a three-class registry into the
    /// first majority class; identity for every other registry shape.
    pub fn default_for(registry: &ClassRegistry) -> Self {
        let minority: Vec<&ClassLabel> = registry.minority().collect();
        if registry.len() == 3 && minority.len() == 1 {
            let first_majority = (0..3)
                .find(|&i| !registry.is_minority(i))
                .expect("has a majority class");
            let mut m = IndexMap::new();
            m.insert(minority[0].clone(), registry.label(first_majority).clone());
            return LenientMap(m);
        }
        LenientMap::identity()
    }

    pub fn apply<'a>(&'a self, class: &'a ClassLabel) -> &'a ClassLabel {
        self.0.get(class).unwrap_or(class)
    }

    pub fn validate(&self, registry: &ClassRegistry) -> Result<()> {
        for (k, v) in &self.0 {
            for c in [k, v] {
                if registry.index_of(c.as_str()).is_none() {
                    return Err(Error::UnknownLabel(c.to_string()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Strict,
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub minority: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub variant: Variant,
    pub total: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub per_class: IndexMap<ClassLabel, ClassMetrics>,
    /// Mean majority-class F1 minus mean minority-class F1; absent when
    /// either group has no scored class.
    pub fairness_gap: Option<f64>,
}

impl MetricReport {
    /// Mean recall over minority classes with support.
    pub fn minority_recall(&self) -> Option<f64> {
        let r: Vec<f64> = self
            .per_class
            .values()
            .filter(|m| m.minority && m.support > 0)
            .map(|m| m.recall)
            .collect();
        (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn compute(matrix: &ConfusionMatrix, minority: &[bool], variant: Variant) -> MetricReport {
    let total = matrix.total();
    let mut per_class = IndexMap::with_capacity(matrix.len());
    let mut scored = Vec::with_capacity(matrix.len());
    for (i, class) in matrix.classes().iter().enumerate() {
        let tp = matrix.get(i, i);
        let support = matrix.row_sum(i);
        let predicted = matrix.col_sum(i);
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let m = ClassMetrics {
            precision,
            recall,
            f1,
            support,
            minority: minority[i],
        };
        if support > 0 || predicted > 0 {
            scored.push(m.clone());
        }
        per_class.insert(class.clone(), m);
    }

    let weighted_f1 = if total == 0 {
        0.0
    } else {
        scored.iter().map(|m| m.f1 * m.support as f64).sum::<f64>() / total as f64
    };
    let majority_f1 = mean(scored.iter().filter(|m| !m.minority).map(|m| m.f1));
    let minority_f1 = mean(scored.iter().filter(|m| m.minority).map(|m| m.f1));

    MetricReport {
        variant,
        total,
        accuracy: ratio(matrix.trace(), total),
        macro_precision: mean(scored.iter().map(|m| m.precision)).unwrap_or(0.0),
        macro_recall: mean(scored.iter().map(|m| m.recall)).unwrap_or(0.0),
        macro_f1: mean(scored.iter().map(|m| m.f1)).unwrap_or(0.0),
        weighted_f1,
        per_class,
        fairness_gap: majority_f1.zip(minority_f1).map(|(a, b)| a - b),
    }
}

/// Scores a confusion matrix. Lenient scoring first merges classes through `lenient_map`.
pub fn report(
    matrix: &ConfusionMatrix,
    registry: &ClassRegistry,
    variant: Variant,
    lenient_map: Option<&LenientMap>,
) -> Result<MetricReport> {
    if matrix.classes() != registry.classes() {
        return Err(Error::InvariantViolation(
            "matrix classes differ from the registry".into(),
        ));
    }
    match variant {
        Variant::Strict => Ok(compute(matrix, registry.minority_mask(), Variant::Strict)),
        Variant::Lenient => {
            let map = lenient_map.ok_or(Error::MissingLenientMap)?;
            let (merged, minority) = matrix.relabel(registry, map)?;
            Ok(compute(&merged, &minority, Variant::Lenient))
        }
    }
}

/// A labelled column of the comparison table.
pub struct TableColumn<'a> {
    pub name: &'a str,
    pub strict: &'a MetricReport,
    pub lenient: &'a MetricReport,
}

/// Four-row comparison table (Strict F1 / Strict Acc / Lenient F1 /
/// Lenient Acc), one column per strategy, percentages to one decimal.
pub fn render_table(columns: &[TableColumn<'_>]) -> String {
    const ROWS: [&str; 4] = ["Strict F1", "Strict Acc", "Lenient F1", "Lenient Acc"];
    let label_width = ROWS.iter().map(|r| r.len()).max().unwrap_or(0);
    let widths: Vec<usize> = columns.iter().map(|c| c.name.len().max(5)).collect();

    let mut out = String::new();
    let _ = write!(out, "{:<label_width$}", "");
    for (c, w) in columns.iter().zip(&widths) {
        let _ = write!(out, "  {:>w$}", c.name);
    }
    out.push('\n');
    for (r, row) in ROWS.iter().enumerate() {
        let _ = write!(out, "{row:<label_width$}");
        for (c, w) in columns.iter().zip(&widths) {
            let v = match r {
                0 => c.strict.macro_f1,
                1 => c.strict.accuracy,
                2 => c.lenient.macro_f1,
                _ => c.lenient.accuracy,
            };
            let _ = write!(out, "  {:>w$.1}", v * 100.0);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TSE: &str = "To some extent";

    fn bea() -> ClassRegistry {
        ClassRegistry::new(["Yes", "No", TSE], [TSE], None).unwrap()
    }

    fn ternary_fixture() -> ConfusionMatrix {
        ConfusionMatrix::from_rows(&bea(), &[vec![8, 1, 1], vec![1, 9, 0], vec![1, 0, 1]]).unwrap()
    }

    /// Per-class F1 by enumerating every (gold, predicted) unit of the matrix.
    fn brute_force_f1(m: &ConfusionMatrix) -> Vec<f64> {
        let k = m.len();
        let mut units = Vec::new();
        for g in 0..k {
            for p in 0..k {
                for _ in 0..m.get(g, p) {
                    units.push((g, p));
                }
            }
        }
        (0..k)
            .map(|c| {
                let tp = units.iter().filter(|&&(g, p)| g == c && p == c).count() as f64;
                let fp = units.iter().filter(|&&(g, p)| g != c && p == c).count() as f64;
                let fneg = units.iter().filter(|&&(g, p)| g == c && p != c).count() as f64;
                if tp == 0.0 {
                    0.0
                } else {
                    2.0 * tp / (2.0 * tp + fp + fneg)
                }
            })
            .collect()
    }

    #[test]
    fn pairs_tally() {
        let r = ClassRegistry::new(["A", "B"], ["B"], None).unwrap();
        let pairs = vec![
            ("A".into(), "A".into()),
            ("A".into(), "B".into()),
            ("B".into(), "B".into()),
        ];
        let m = confusion(&pairs, &r).unwrap();
        assert_eq!(
            (m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)),
            (1, 1, 0, 1)
        );
        assert_eq!(confusion(&[], &r).unwrap().total(), 0);
        assert!(confusion(&[("A".into(), "Z".into())], &r).is_err());
    }

    #[test]
    fn ternary_fixture_metrics() {
        let m = ternary_fixture();
        let rep = report(&m, &bea(), Variant::Strict, None).unwrap();
        let brute = brute_force_f1(&m);
        for (i, c) in bea().classes().iter().enumerate() {
            assert!((rep.per_class[c].f1 - brute[i]).abs() < 1e-12);
        }
        // Yes: P = 8/10, R = 8/10; No: 9/10, 9/10; TSE: 1/2, 1/2
        assert!((rep.per_class["Yes"].f1 - 0.8).abs() < 1e-12);
        assert!((rep.per_class["No"].f1 - 0.9).abs() < 1e-12);
        assert!((rep.per_class[TSE].f1 - 0.5).abs() < 1e-12);
        assert!((rep.macro_f1 - 2.2 / 3.0).abs() < 1e-12);
        assert!((rep.accuracy - 18.0 / 22.0).abs() < 1e-12);
        assert!((rep.fairness_gap.unwrap() - (0.85 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn lenient_merge_matches_relabel_oracle() {
        let m = ternary_fixture();
        let map = LenientMap::default_for(&bea());
        assert_eq!(map.apply(&TSE.into()).as_str(), "Yes");
        let rep = report(&m, &bea(), Variant::Lenient, Some(&map)).unwrap();
        // merged rows: gold Yes' = [8+1+1+1, 1+0] = [11, 1]; gold No = [1+0, 9]
        let r2 = ClassRegistry::new(["Yes", "No"], [], None).unwrap();
        let merged = ConfusionMatrix::from_rows(&r2, &[vec![11, 1], vec![1, 9]]).unwrap();
        let expected = report(&merged, &r2, Variant::Strict, None).unwrap();
        assert_eq!(rep.per_class.len(), 2);
        assert!((rep.macro_f1 - expected.macro_f1).abs() < 1e-12);
        assert!((rep.accuracy - 20.0 / 22.0).abs() < 1e-12);
        assert_eq!(rep.fairness_gap, None);
        assert_eq!(
            report(&m, &bea(), Variant::Lenient, None),
            Err(Error::MissingLenientMap)
        );
    }

    #[test]
    fn perfect_predictions() {
        let m = ConfusionMatrix::from_rows(&bea(), &[vec![5, 0, 0], vec![0, 3, 0], vec![0, 0, 2]])
            .unwrap();
        let rep = report(&m, &bea(), Variant::Strict, None).unwrap();
        assert_eq!(
            (rep.accuracy, rep.macro_f1, rep.fairness_gap),
            (1.0, 1.0, Some(0.0))
        );
    }

    #[test]
    fn absent_class_is_excluded_from_macro() {
        let m = ConfusionMatrix::from_rows(&bea(), &[vec![5, 1, 0], vec![0, 4, 0], vec![0, 0, 0]])
            .unwrap();
        let rep = report(&m, &bea(), Variant::Strict, None).unwrap();
        let yes = rep.per_class["Yes"].f1;
        let no = rep.per_class["No"].f1;
        assert!((rep.macro_f1 - (yes + no) / 2.0).abs() < 1e-12);
        assert_eq!(rep.per_class[TSE].f1, 0.0);
        assert_eq!(rep.fairness_gap, None);
    }

    #[test]
    fn missed_class_counts_as_zero() {
        let m = ConfusionMatrix::from_rows(&bea(), &[vec![5, 0, 0], vec![0, 4, 0], vec![2, 0, 0]])
            .unwrap();
        let rep = report(&m, &bea(), Variant::Strict, None).unwrap();
        let yes = rep.per_class["Yes"].f1;
        assert!((rep.macro_f1 - (yes + 1.0 + 0.0) / 3.0).abs() < 1e-12);
        assert!(rep.fairness_gap.unwrap() > 0.0);
    }

    #[test]
    fn minority_beating_majority_gives_negative_gap() {
        let m = ConfusionMatrix::from_rows(&bea(), &[vec![5, 3, 0], vec![3, 5, 0], vec![0, 0, 4]])
            .unwrap();
        let rep = report(&m, &bea(), Variant::Strict, None).unwrap();
        assert!(rep.fairness_gap.unwrap() < 0.0);
    }

    #[test]
    fn table_layout() {
        let m = ternary_fixture();
        let s = report(&m, &bea(), Variant::Strict, None).unwrap();
        let l = report(
            &m,
            &bea(),
            Variant::Lenient,
            Some(&LenientMap::default_for(&bea())),
        )
        .unwrap();
        let t = render_table(&[TableColumn {
            name: "camo",
            strict: &s,
            lenient: &l,
        }]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("Strict F1") && lines[1].ends_with("73.3"));
        assert!(lines[2].ends_with("81.8"));
        assert!(lines[4].starts_with("Lenient Acc") && lines[4].ends_with("90.9"));
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<u64>>> {
        prop::collection::vec(prop::collection::vec(0u64..20, 3), 3)
    }

    proptest! {
        #[test]
        fn invariants(rows in arb_matrix()) {
            let r = bea();
            let m = ConfusionMatrix::from_rows(&r, &rows).unwrap();
            let strict = report(&m, &r, Variant::Strict, None).unwrap();
            let ident = report(&m, &r, Variant::Lenient, Some(&LenientMap::identity())).unwrap();
            prop_assert_eq!(strict.macro_f1, ident.macro_f1);
            prop_assert_eq!(strict.accuracy, ident.accuracy);
            prop_assert_eq!(&strict.per_class, &ident.per_class);
            prop_assert_eq!(strict.accuracy, ratio(m.trace(), m.total()));
            for v in [strict.accuracy, strict.macro_f1, strict.macro_precision, strict.macro_recall, strict.weighted_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let supported: Vec<f64> = strict.per_class.values().filter(|c| c.support > 0).map(|c| c.f1).collect();
            if !supported.is_empty() {
                let lo = supported.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = supported.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(strict.weighted_f1 >= lo - 1e-12 && strict.weighted_f1 <= hi + 1e-12);
            }
            prop_assert_eq!(strict.per_class.values().map(|c| c.support).sum::<u64>(), m.total());
        }

        #[test]
        fn macro_f1_ignores_class_order(rows in arb_matrix()) {
            let r = bea();
            let m = ConfusionMatrix::from_rows(&r, &rows).unwrap();
            let perm = [2usize, 0, 1];
            let r2 = ClassRegistry::new(perm.map(|i| r.label(i).clone()), [TSE.into()], None).unwrap();
            let rows2: Vec<Vec<u64>> = perm.iter().map(|&g| perm.iter().map(|&p| rows[g][p]).collect()).collect();
            let m2 = ConfusionMatrix::from_rows(&r2, &rows2).unwrap();
            let a = report(&m, &r, Variant::Strict, None).unwrap();
            let b = report(&m2, &r2, Variant::Strict, None).unwrap();
            prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
        }

        #[test]
        fn shard_sums_match(pairs in prop::collection::vec((0usize..3, 0usize..3), 0..200), cut in 0usize..200) {
            let r = bea();
            let cut = cut.min(pairs.len());
            let mut whole = ConfusionMatrix::new(&r);
            pairs.iter().for_each(|&(g, p)| whole.add(g, p));
            let mut left = ConfusionMatrix::new(&r);
            let mut right = ConfusionMatrix::new(&r);
            pairs[..cut].iter().for_each(|&(g, p)| left.add(g, p));
            pairs[cut..].iter().for_each(|&(g, p)| right.add(g, p));
            right.merge(&left);
            prop_assert_eq!(right, whole);
        }
    }
}
