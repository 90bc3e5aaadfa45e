use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{InductionError, SplitTest};
use crate::dataset::{AttributeKind, CellValue, Dataset};
use crate::distribution::ClassDistribution;

/// Two scores closer than this are treated as tied.
pub(crate) const TIE_EPS: f64 = 1e-12;

/// Shannon entropy in bits. Zero-count classes contribute nothing.
pub fn entropy(dist: &ClassDistribution) -> Result<f64, InductionError> {
    let counts: Vec<f64> = dist.iter().map(|(_, n)| n).collect();
    if counts.iter().sum::<f64>().partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(InductionError::EmptyDistribution);
    }
    Ok(entropy_of(&counts))
}

pub(crate) fn entropy_of(counts: &[f64]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            -p * libm::log2(p)
        })
        .sum::<f64>()
        .max(0.0)
}

pub(crate) fn ratio(gain: f64, split_info: f64) -> f64 {
    if split_info > 0.0 {
        gain / split_info
    } else {
        0.0
    }
}

/// Gain and split information of one candidate split over the rows with a
/// known value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SplitScore {
    pub gain: f64,
    pub split_info: f64,
    /// Rows with a known value for the tested attribute.
    pub known: usize,
    pub threshold: Option<f64>,
}

impl SplitScore {
    pub fn gain_ratio(&self) -> f64 {
        ratio(self.gain, self.split_info)
    }
}

/// Class-count vectors for each part of a split.
fn score_parts(parts: &[Vec<f64>], n_classes: usize) -> (f64, f64) {
    let mut parent = vec![0.0; n_classes];
    let mut sizes = Vec::with_capacity(parts.len());
    for part in parts {
        for (p, c) in parent.iter_mut().zip(part) {
            *p += c;
        }
        sizes.push(part.iter().sum::<f64>());
    }
    let n: f64 = sizes.iter().sum();
    if n <= 0.0 {
        return (0.0, 0.0);
    }
    let weighted: f64 = parts
        .iter()
        .zip(&sizes)
        .filter(|(_, &s)| s > 0.0)
        .map(|(part, &s)| s / n * entropy_of(part))
        .sum();
    let gain = (entropy_of(&parent) - weighted).max(0.0);
    (gain, entropy_of(&sizes))
}

pub(crate) enum Column {
    Categorical {
        domain: Vec<String>,
        codes: Vec<Option<usize>>,
    },
    Continuous {
        values: Vec<Option<f64>>,
    },
}

/// Dataset re-encoded as integer class codes and per-feature columns.
pub(crate) struct Encoded {
    pub classes: Vec<String>,
    pub class_of: Vec<Option<usize>>,
    pub names: Vec<String>,
    pub columns: Vec<Column>,
}

impl Encoded {
    pub fn new(d: &Dataset, features: &[String]) -> Result<Self, InductionError> {
        let schema = d.schema();
        let class_index = schema.class_index();
        let classes: Vec<String> = match schema.class_attribute().kind.domain() {
            Some(domain) => domain.to_vec(),
            None => (0..d.len())
                .filter_map(|r| d.class_label(r))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .map(str::to_string)
                .collect(),
        };
        let class_of = (0..d.len())
            .map(|r| d.class_label(r).and_then(|l| classes.iter().position(|c| c == l)))
            .collect();

        let mut columns = Vec::with_capacity(features.len());
        for name in features {
            let index = schema
                .index_of(name)
                .ok_or_else(|| InductionError::NoSuchAttribute(name.clone()))?;
            if index == class_index {
                return Err(InductionError::ClassAttributeAsFeature(name.clone()));
            }
            let column = match &schema.attributes()[index].kind {
                AttributeKind::Categorical { domain } => Column::Categorical {
                    domain: domain.clone(),
                    codes: d
                        .rows()
                        .iter()
                        .map(|row| match &row.cells()[index] {
                            CellValue::Text(v) => domain.iter().position(|x| x == v),
                            _ => None,
                        })
                        .collect(),
                },
                AttributeKind::Continuous { .. } => Column::Continuous {
                    values: d
                        .rows()
                        .iter()
                        .map(|row| row.cells()[index].as_number())
                        .collect(),
                },
                AttributeKind::Text => return Err(InductionError::NotCategorical(name.clone())),
            };
            columns.push(column);
        }
        Ok(Encoded {
            classes,
            class_of,
            names: features.to_vec(),
            columns,
        })
    }

    pub fn labeled_rows(&self) -> Vec<usize> {
        (0..self.class_of.len())
            .filter(|&r| self.class_of[r].is_some())
            .collect()
    }

    pub fn counts(&self, rows: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.classes.len()];
        for &r in rows {
            if let Some(c) = self.class_of[r] {
                counts[c] += 1.0;
            }
        }
        counts
    }

    pub fn distribution(&self, counts: &[f64]) -> ClassDistribution {
        ClassDistribution::from_counts(self.classes.iter().map(String::as_str).zip(counts.iter().copied()))
    }

    pub fn score_categorical(&self, column: usize, rows: &[usize]) -> SplitScore {
        let Column::Categorical { domain, codes } = &self.columns[column] else {
            unreachable!("categorical column expected")
        };
        let mut parts = vec![vec![0.0; self.classes.len()]; domain.len()];
        let mut known = 0;
        for &r in rows {
            if let (Some(v), Some(c)) = (codes[r], self.class_of[r]) {
                parts[v][c] += 1.0;
                known += 1;
            }
        }
        let (gain, split_info) = score_parts(&parts, self.classes.len());
        SplitScore {
            gain,
            split_info,
            known,
            threshold: None,
        }
    }

    fn sorted_known(&self, column: usize, rows: &[usize]) -> Vec<(f64, usize)> {
        let Column::Continuous { values } = &self.columns[column] else {
            unreachable!("continuous column expected")
        };
        let mut known: Vec<(f64, usize)> = rows
            .iter()
            .filter_map(|&r| Some((values[r]?, self.class_of[r]?)))
            .collect();
        known.sort_by(|a, b| a.0.total_cmp(&b.0));
        known
    }

    pub fn score_threshold(&self, column: usize, rows: &[usize], threshold: f64) -> SplitScore {
        let known = self.sorted_known(column, rows);
        let mut parts = vec![vec![0.0; self.classes.len()]; 2];
        for &(x, c) in &known {
            parts[usize::from(x > threshold)][c] += 1.0;
        }
        let (gain, split_info) = score_parts(&parts, self.classes.len());
        SplitScore {
            gain,
            split_info,
            known: known.len(),
            threshold: Some(threshold),
        }
    }

    /// Best `<=` threshold by gain ratio over midpoints between consecutive
    /// distinct values; ties keep the smallest threshold. `None` when fewer
    /// than two distinct values are known.
    pub fn score_best_threshold(&self, column: usize, rows: &[usize]) -> Option<SplitScore> {
        let known = self.sorted_known(column, rows);
        let k = self.classes.len();
        let mut right = vec![0.0; k];
        for &(_, c) in &known {
            right[c] += 1.0;
        }
        let mut left = vec![0.0; k];
        let mut best: Option<SplitScore> = None;
        for i in 0..known.len().saturating_sub(1) {
            let (x, c) = known[i];
            left[c] += 1.0;
            right[c] -= 1.0;
            let next = known[i + 1].0;
            if next <= x {
                continue;
            }
            let (gain, split_info) = score_parts(&[left.clone(), right.clone()], k);
            let candidate = SplitScore {
                gain,
                split_info,
                known: known.len(),
                threshold: Some(midpoint(x, next)),
            };
            if best.map_or(true, |b| candidate.gain_ratio() > b.gain_ratio() + TIE_EPS) {
                best = Some(candidate);
            }
        }
        best
    }
}

/// Midpoint of `a < b` that still sorts `a` to the `<=` side and `b` to the
/// `>` side.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

fn encode_for_test(d: &Dataset, test: &SplitTest) -> Result<(Encoded, Vec<usize>), InductionError> {
    let enc = Encoded::new(d, &[test.attribute().to_string()])?;
    match (test, &enc.columns[0]) {
        (SplitTest::Categorical { .. }, Column::Categorical { .. }) => {}
        (SplitTest::Continuous { threshold, .. }, Column::Continuous { .. }) => {
            if !threshold.is_finite() {
                return Err(InductionError::InvalidModel("non-finite threshold".to_string()));
            }
        }
        (SplitTest::Categorical { attribute }, _) => {
            return Err(InductionError::NotCategorical(attribute.clone()))
        }
        (SplitTest::Continuous { attribute, .. }, _) => {
            return Err(InductionError::NotContinuous(attribute.clone()))
        }
    }
    let rows = enc.labeled_rows();
    if rows.is_empty() {
        return Err(InductionError::EmptyDistribution);
    }
    Ok((enc, rows))
}

fn score_test(d: &Dataset, test: &SplitTest) -> Result<SplitScore, InductionError> {
    let (enc, rows) = encode_for_test(d, test)?;
    Ok(match test {
        SplitTest::Categorical { .. } => enc.score_categorical(0, &rows),
        SplitTest::Continuous { threshold, .. } => enc.score_threshold(0, &rows, *threshold),
    })
}

/// `H(D') − Σ |D_i|/|D'| · H(D_i)` where `D'` holds the labeled rows with a
/// known value for the tested attribute.
pub fn information_gain(d: &Dataset, test: &SplitTest) -> Result<f64, InductionError> {
    score_test(d, test).map(|s| s.gain)
}

/// Entropy of the partition sizes induced by `test`.
pub fn split_info(d: &Dataset, test: &SplitTest) -> Result<f64, InductionError> {
    score_test(d, test).map(|s| s.split_info)
}

/// Information gain over split information, or 0 when the split information
/// is 0.
pub fn gain_ratio(d: &Dataset, test: &SplitTest) -> Result<f64, InductionError> {
    score_test(d, test).map(|s| s.gain_ratio())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousSplit {
    pub threshold: f64,
    pub gain_ratio: f64,
    pub gain: f64,
    pub split_info: f64,
}

pub fn best_continuous_split(d: &Dataset, attribute: &str) -> Result<ContinuousSplit, InductionError> {
    let (enc, rows) = encode_for_test(d, &SplitTest::continuous(attribute, 0.0))?;
    let best = enc
        .score_best_threshold(0, &rows)
        .ok_or_else(|| InductionError::TooFewDistinctValues(attribute.to_string()))?;
    Ok(ContinuousSplit {
        threshold: best.threshold.expect("threshold split"),
        gain_ratio: best.gain_ratio(),
        gain: best.gain,
        split_info: best.split_info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{AttributeSchema, Role, Row, Schema};

    fn processed_schema() -> Schema {
        Schema::new(vec![
            AttributeSchema::categorical("merit", &["good", "bad"], Role::Feature),
            AttributeSchema::categorical("gender", &["Male", "Female"], Role::Feature),
            AttributeSchema::continuous("merit_marks", "marks/200", Role::Feature),
            AttributeSchema::categorical("class", &["pass", "fail"], Role::ClassLabel),
        ])
        .unwrap()
    }

    fn row(merit: &str, gender: &str, marks: f64, class: &str) -> Row {
        Row::new(vec![
            CellValue::text(merit),
            CellValue::text(gender),
            CellValue::Number(marks),
            CellValue::text(class),
        ])
    }

    /// The published eleven-row sample (merit marks from the raw table).
    fn sample() -> Dataset {
        let marks = [153.0, 152.0, 143.0, 136.0, 132.0, 109.0, 156.0, 144.0, 140.0, 168.0, 162.0];
        let rows = marks
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                row(
                    if m >= 120.0 { "good" } else { "bad" },
                    if i == 1 { "Female" } else { "Male" },
                    m,
                    if i == 8 { "fail" } else { "pass" },
                )
            })
            .collect();
        Dataset::new(processed_schema(), rows).unwrap()
    }

    /// Independent evaluation of −Σ p log2 p with explicit probabilities.
    fn h(ps: &[f64]) -> f64 {
        ps.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln() / core::f64::consts::LN_2).sum()
    }

    #[test]
    fn entropy_known_values() {
        let d = ClassDistribution::from_counts([("pass", 7.0), ("fail", 7.0)]);
        assert_eq!(entropy(&d).unwrap(), 1.0);
        let d = ClassDistribution::from_counts([("pass", 10.0), ("fail", 0.0)]);
        assert_eq!(entropy(&d).unwrap(), 0.0);
        let d = ClassDistribution::from_counts([("pass", 9.0), ("fail", 5.0)]);
        let oracle = h(&[9.0 / 14.0, 5.0 / 14.0]);
        assert!((oracle - 0.940286).abs() < 1e-6);
        assert!((entropy(&d).unwrap() - 0.940286).abs() < 1e-6);
        assert_eq!(
            entropy(&ClassDistribution::new()).unwrap_err(),
            InductionError::EmptyDistribution
        );
    }

    #[test]
    fn gain_on_sample_merit_matches_oracle() {
        // good: 9 pass 1 fail, bad: 1 pass
        let oracle = h(&[10.0 / 11.0, 1.0 / 11.0]) - 10.0 / 11.0 * h(&[0.9, 0.1]);
        assert!((oracle - 0.01310).abs() < 1e-4);
        let g = information_gain(&sample(), &SplitTest::categorical("merit")).unwrap();
        assert!((g - oracle).abs() < 1e-12);
        assert!((g - 0.01310).abs() < 1e-4);
    }

    #[test]
    fn split_info_and_ratio_on_sample_merit() {
        let si_oracle = h(&[10.0 / 11.0, 1.0 / 11.0]);
        assert!((si_oracle - 0.43950).abs() < 1e-4);
        let si = split_info(&sample(), &SplitTest::categorical("merit")).unwrap();
        assert!((si - si_oracle).abs() < 1e-12);
        let gr = gain_ratio(&sample(), &SplitTest::categorical("merit")).unwrap();
        assert!((gr - 0.0298).abs() < 1e-3);
    }

    fn binary(rows: &[(&str, &str)]) -> Dataset {
        Dataset::new(
            processed_schema(),
            rows.iter().map(|(m, c)| row(m, "Male", 1.0, c)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_and_trivial_splits() {
        let d = binary(&[("good", "pass"), ("good", "pass"), ("bad", "fail"), ("bad", "fail")]);
        let test = SplitTest::categorical("merit");
        assert_eq!(information_gain(&d, &test).unwrap(), 1.0);
        assert_eq!(split_info(&d, &test).unwrap(), 1.0);
        assert_eq!(gain_ratio(&d, &test).unwrap(), 1.0);

        let gender = SplitTest::categorical("gender");
        assert_eq!(information_gain(&d, &gender).unwrap(), 0.0);
        assert_eq!(split_info(&d, &gender).unwrap(), 0.0);
        assert_eq!(gain_ratio(&d, &gender).unwrap(), 0.0);
    }

    #[test]
    fn measure_errors() {
        let d = sample();
        assert_eq!(
            information_gain(&d, &SplitTest::categorical("height")).unwrap_err(),
            InductionError::NoSuchAttribute("height".into())
        );
        assert_eq!(
            information_gain(&d, &SplitTest::categorical("merit_marks")).unwrap_err(),
            InductionError::NotCategorical("merit_marks".into())
        );
        let empty = Dataset::empty(processed_schema());
        assert_eq!(
            information_gain(&empty, &SplitTest::categorical("merit")).unwrap_err(),
            InductionError::EmptyDistribution
        );
    }

    #[test]
    fn continuous_forced_midpoint() {
        let d = Dataset::new(
            processed_schema(),
            vec![
                row("good", "Male", 1.0, "fail"),
                row("good", "Male", 1.0, "fail"),
                row("good", "Male", 2.0, "pass"),
                row("good", "Male", 2.0, "pass"),
            ],
        )
        .unwrap();
        let s = best_continuous_split(&d, "merit_marks").unwrap();
        assert_eq!(s.threshold, 1.5);
        assert_eq!(s.gain, 1.0);
        assert_eq!(s.gain_ratio, 1.0);
    }

    #[test]
    fn continuous_needs_two_distinct_values() {
        let d = Dataset::new(
            processed_schema(),
            vec![row("good", "Male", 3.0, "fail"), row("good", "Male", 3.0, "pass")],
        )
        .unwrap();
        assert_eq!(
            best_continuous_split(&d, "merit_marks").unwrap_err(),
            InductionError::TooFewDistinctValues("merit_marks".into())
        );
        assert_eq!(
            best_continuous_split(&d, "merit").unwrap_err(),
            InductionError::NotContinuous("merit".into())
        );
    }

    /// Exhaustive oracle over all nine midpoints of the sample's merit marks.
    #[test]
    fn continuous_sample_matches_exhaustive_midpoints() {
        let d = sample();
        let mut pairs: Vec<(f64, bool)> = (0..d.len())
            .map(|r| (d.cell(r, 2).as_number().unwrap(), d.class_label(r) == Some("pass")))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        distinct.dedup();
        // 11 rows, all marks distinct: 10 midpoints.
        assert_eq!(distinct.len(), 11);
        let mut best = (f64::NAN, -1.0);
        for w in distinct.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut lp, mut lf, mut rp, mut rf) = (0.0, 0.0, 0.0, 0.0);
            for &(x, pass) in &pairs {
                match (x <= t, pass) {
                    (true, true) => lp += 1.0,
                    (true, false) => lf += 1.0,
                    (false, true) => rp += 1.0,
                    (false, false) => rf += 1.0,
                }
            }
            let (nl, nr, n) = (lp + lf, rp + rf, 11.0);
            let gain = h(&[10.0 / n, 1.0 / n]) - nl / n * h(&[lp / nl, lf / nl]) - nr / n * h(&[rp / nr, rf / nr]);
            let si = h(&[nl / n, nr / n]);
            let gr = gain / si;
            if gr > best.1 + 1e-12 {
                best = (t, gr);
            }
        }
        // The lone fail has 140 marks; the best cut isolates it from below.
        assert_eq!(best.0, 141.5);
        let s = best_continuous_split(&d, "merit_marks").unwrap();
        assert_eq!(s.threshold, best.0);
        assert!((s.gain_ratio - best.1).abs() < 1e-12);
    }

    #[test]
    fn missing_values_are_excluded() {
        let mut rows = vec![
            row("good", "Male", 1.0, "pass"),
            row("bad", "Male", 1.0, "fail"),
        ];
        rows.push(Row::new(vec![
            CellValue::Missing,
            CellValue::text("Male"),
            CellValue::Number(1.0),
            CellValue::text("fail"),
        ]));
        let d = Dataset::new(processed_schema(), rows).unwrap();
        let g = information_gain(&d, &SplitTest::categorical("merit")).unwrap();
        assert_eq!(g, 1.0);
    }
}
