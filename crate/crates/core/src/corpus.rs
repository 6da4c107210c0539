//! Requirement-traced test suites and their evaluation-only fault matrices.
//!
//! A corpus file is line-delimited JSON. The first non-blank line is a
//! header declaring the requirement ids, every following line is one test
//! case:
//!
//! ```text
//! {"requirements":["R1","R2"]}
//! {"id":"TC1","requirement_ids":["R1"],"steps":["STEP 1 Set Global Preconditions","Read variable Variable_A"]}
//! ```
//!
//! A fault matrix is a separate line-delimited file of
//! `{"test_case_id":"TC1","fault_ids":["F3","F9"]}` records. Test cases
//! without a record detect nothing.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub id: String,
    pub requirement_ids: BTreeSet<String>,
    pub steps: Vec<String>,
}

impl TestCase {
    /// Steps joined with line breaks.
    pub fn raw_text(&self) -> String {
        self.steps.join("\n")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    requirements: Vec<String>,
}

/// A requirement-traced test suite. Test-case order is file order and
/// defines the position of each case in a selection vector.
#[derive(Debug, Clone)]
pub struct Corpus {
    requirements: Vec<String>,
    test_cases: Vec<TestCase>,
    case_index: HashMap<String, usize>,
    cover: Vec<Vec<usize>>,
    cases_by_req: Vec<Vec<usize>>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.requirements == other.requirements && self.test_cases == other.test_cases
    }
}

impl Corpus {
    pub fn new(requirements: Vec<String>, test_cases: Vec<TestCase>) -> Result<Self> {
        let mut req_index = HashMap::with_capacity(requirements.len());
        for (i, r) in requirements.iter().enumerate() {
            if req_index.insert(r.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.clone()));
            }
        }
        let mut case_index = HashMap::with_capacity(test_cases.len());
        let mut cover = Vec::with_capacity(test_cases.len());
        let mut cases_by_req = vec![Vec::new(); requirements.len()];
        for (i, tc) in test_cases.iter().enumerate() {
            if case_index.insert(tc.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(tc.id.clone()));
            }
            let mut reqs = Vec::with_capacity(tc.requirement_ids.len());
            for r in &tc.requirement_ids {
                let Some(&ri) = req_index.get(r) else {
                    return Err(Error::UnknownRequirement {
                        test_case: tc.id.clone(),
                        requirement: r.clone(),
                    });
                };
                reqs.push(ri);
                cases_by_req[ri].push(i);
            }
            reqs.sort_unstable();
            cover.push(reqs);
        }
        Ok(Corpus { requirements, test_cases, case_index, cover, cases_by_req })
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header: Option<Header> = None;
        let mut cases = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let malformed = |e: serde_json::Error| Error::MalformedRecord {
                line: lineno + 1,
                message: e.to_string(),
            };
            if header.is_none() {
                header = Some(serde_json::from_str(line).map_err(malformed)?);
            } else {
                cases.push(serde_json::from_str::<TestCase>(line).map_err(malformed)?);
            }
        }
        let header = header.ok_or(Error::MalformedRecord {
            line: 0,
            message: "missing requirements header".into(),
        })?;
        Corpus::new(header.requirements, cases)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let header = Header { requirements: self.requirements.clone() };
        out.push_str(&serde_json::to_string(&header).expect("header serializes"));
        out.push('\n');
        for tc in &self.test_cases {
            out.push_str(&serde_json::to_string(tc).expect("test case serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn requirements(&self) -> &[String] {
        &self.requirements
    }

    pub fn test_cases(&self) -> &[TestCase] {
        &self.test_cases
    }

    pub fn m(&self) -> usize {
        self.test_cases.len()
    }

    pub fn n_req(&self) -> usize {
        self.requirements.len()
    }

    /// Requirement indices covered by test case `i`.
    pub fn cover(&self, i: usize) -> &[usize] {
        &self.cover[i]
    }

    /// Test-case indices tracing to requirement `r`.
    pub fn cases_for(&self, r: usize) -> &[usize] {
        &self.cases_by_req[r]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.case_index.get(id).copied()
    }

    /// True when every test case covers at most one requirement.
    pub fn is_many_to_one(&self) -> bool {
        self.cover.iter().all(|c| c.len() <= 1)
    }

    /// Number of distinct requirements covered by the selected indices.
    pub fn covered_count(&self, selected: &[usize]) -> usize {
        let mut seen = vec![false; self.n_req()];
        let mut count = 0;
        for &i in selected {
            for &r in &self.cover[i] {
                if !seen[r] {
                    seen[r] = true;
                    count += 1;
                }
            }
        }
        count
    }

    pub fn covers_all(&self, selected: &[usize]) -> bool {
        self.covered_count(selected) == self.n_req()
    }

    /// A new corpus made of the given test cases (in the given order),
    /// keeping only the requirements they trace to.
    pub fn subset(&self, indices: &[usize]) -> Corpus {
        let mut used = vec![false; self.n_req()];
        for &i in indices {
            for &r in &self.cover[i] {
                used[r] = true;
            }
        }
        let requirements = self
            .requirements
            .iter()
            .zip(&used)
            .filter(|(_, &u)| u)
            .map(|(r, _)| r.clone())
            .collect();
        let cases = indices.iter().map(|&i| self.test_cases[i].clone()).collect();
        Corpus::new(requirements, cases).expect("a subset of a valid corpus is valid")
    }
}

pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::from_jsonl(&text)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FaultRecord {
    test_case_id: String,
    fault_ids: BTreeSet<String>,
}

/// Ground-truth fault detections keyed by test-case id. Evaluation only.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FaultMatrix {
    pub detects: BTreeMap<String, BTreeSet<String>>,
}

impl FaultMatrix {
    pub fn fault_ids(&self) -> BTreeSet<&str> {
        self.detects.values().flatten().map(String::as_str).collect()
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut detects = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let rec: FaultRecord =
                serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                    line: lineno + 1,
                    message: e.to_string(),
                })?;
            if detects.insert(rec.test_case_id.clone(), rec.fault_ids).is_some() {
                return Err(Error::DuplicateId(rec.test_case_id));
            }
        }
        Ok(FaultMatrix { detects })
    }

    /// Records are written in corpus order so the file lines up with the
    /// corpus file; ids unknown to the corpus follow in lexical order.
    pub fn to_jsonl(&self, corpus: &Corpus) -> String {
        let mut out = String::new();
        let mut push = |id: &str, faults: &BTreeSet<String>| {
            let rec = FaultRecord { test_case_id: id.to_string(), fault_ids: faults.clone() };
            out.push_str(&serde_json::to_string(&rec).expect("fault record serializes"));
            out.push('\n');
        };
        for tc in corpus.test_cases() {
            if let Some(f) = self.detects.get(&tc.id) {
                push(&tc.id, f);
            }
        }
        for (id, f) in &self.detects {
            if corpus.index_of(id).is_none() {
                push(id, f);
            }
        }
        out
    }

    pub fn write(&self, corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl(corpus)).map_err(|e| Error::io(path, e))
    }

    /// Keeps only the records of the given test-case ids.
    pub fn restrict<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> FaultMatrix {
        let detects = ids
            .into_iter()
            .filter_map(|id| self.detects.get(id).map(|f| (id.to_string(), f.clone())))
            .collect();
        FaultMatrix { detects }
    }

    /// Index the matrix against a corpus.
    pub fn resolve(&self, corpus: &Corpus) -> Result<FaultTable> {
        let mut fault_ids: Vec<String> = self.fault_ids().into_iter().map(String::from).collect();
        fault_ids.sort();
        let fault_index: HashMap<&str, u32> =
            fault_ids.iter().enumerate().map(|(i, f)| (f.as_str(), i as u32)).collect();
        let mut per_case = vec![Vec::new(); corpus.m()];
        for (id, faults) in &self.detects {
            let i = corpus.index_of(id).ok_or_else(|| Error::UnknownTestCase(id.clone()))?;
            per_case[i] = faults.iter().map(|f| fault_index[f.as_str()]).collect();
        }
        Ok(FaultTable { fault_ids, per_case })
    }
}

pub fn parse_fault_matrix(path: impl AsRef<Path>) -> Result<FaultMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FaultMatrix::from_jsonl(&text)
}

/// A fault matrix resolved against a corpus: fault index lists per test case.
#[derive(Debug, Clone)]
pub struct FaultTable {
    fault_ids: Vec<String>,
    per_case: Vec<Vec<u32>>,
}

impl FaultTable {
    pub fn from_lists(n_faults: usize, per_case: Vec<Vec<u32>>) -> Self {
        let fault_ids = (0..n_faults).map(|f| format!("F{f}")).collect();
        FaultTable { fault_ids, per_case }
    }

    pub fn n_faults(&self) -> usize {
        self.fault_ids.len()
    }

    pub fn fault_ids(&self) -> &[String] {
        &self.fault_ids
    }

    pub fn detected_by(&self, case: usize) -> &[u32] {
        &self.per_case[case]
    }

    pub fn m(&self) -> usize {
        self.per_case.len()
    }

    /// Number of distinct faults detected by the selected cases.
    pub fn unique_detected(&self, selected: impl IntoIterator<Item = usize>) -> usize {
        let mut seen = vec![false; self.n_faults()];
        let mut count = 0;
        for i in selected {
            for &f in &self.per_case[i] {
                if !seen[f as usize] {
                    seen[f as usize] = true;
                    count += 1;
                }
            }
        }
        count
    }

    /// Sum over the selected cases of the number of faults each detects.
    pub fn total_detections(&self, selected: impl IntoIterator<Item = usize>) -> usize {
        selected.into_iter().map(|i| self.per_case[i].len()).sum()
    }
}

/// Mean number of detections per unique fault over the selected cases (the
/// whole suite when `subset` is `None`). Unique faults are counted over the
/// same selection.
pub fn redundancy_level(faults: &FaultTable, subset: Option<&[usize]>) -> Result<f64> {
    let all: Vec<usize>;
    let selected = match subset {
        Some(s) => s,
        None => {
            all = (0..faults.m()).collect();
            &all
        }
    };
    redundancy_ratio(
        faults.total_detections(selected.iter().copied()),
        faults.unique_detected(selected.iter().copied()),
    )
}

/// Total detections divided by unique faults.
pub fn redundancy_ratio(total_detections: usize, unique_faults: usize) -> Result<f64> {
    if unique_faults == 0 {
        return Err(Error::NoFaultsDetected);
    }
    Ok(total_detections as f64 / unique_faults as f64)
}

/// |a ∩ b| / |a ∪ b|.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> Result<f64> {
    if a.is_empty() && b.is_empty() {
        return Err(Error::EmptySets);
    }
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FindingCode {
    UncoveredRequirement,
    EmptyCover,
    EmptySteps,
    DanglingFaultRef,
    NoFaults,
    MultiCover,
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub code: FindingCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub m: usize,
    pub n_req: usize,
    pub f_unique: Option<usize>,
    pub rl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
    pub stats: CorpusStats,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: FindingCode) -> bool {
        self.errors.iter().any(|f| f.code == code)
    }
}

pub fn validate_corpus(corpus: &Corpus, faults: Option<&FaultMatrix>) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    for (r, id) in corpus.requirements().iter().enumerate() {
        if corpus.cases_for(r).is_empty() {
            errors.push(Finding {
                code: FindingCode::UncoveredRequirement,
                message: format!("requirement {id} is not covered by any test case"),
            });
        }
    }
    for tc in corpus.test_cases() {
        if tc.requirement_ids.is_empty() {
            errors.push(Finding {
                code: FindingCode::EmptyCover,
                message: format!("test case {} covers no requirement", tc.id),
            });
        } else if tc.requirement_ids.len() > 1 {
            warnings.push(Finding {
                code: FindingCode::MultiCover,
                message: format!(
                    "test case {} covers {} requirements",
                    tc.id,
                    tc.requirement_ids.len()
                ),
            });
        }
        if tc.steps.iter().all(|s| s.trim().is_empty()) {
            errors.push(Finding {
                code: FindingCode::EmptySteps,
                message: format!("test case {} has no step text", tc.id),
            });
        }
    }

    let mut stats = CorpusStats { m: corpus.m(), n_req: corpus.n_req(), f_unique: None, rl: None };
    if let Some(faults) = faults {
        let mut dangling = false;
        for id in faults.detects.keys() {
            if corpus.index_of(id).is_none() {
                dangling = true;
                errors.push(Finding {
                    code: FindingCode::DanglingFaultRef,
                    message: format!("fault record references unknown test case {id}"),
                });
            }
        }
        if faults.fault_ids().is_empty() {
            errors.push(Finding {
                code: FindingCode::NoFaults,
                message: "fault matrix detects no fault".into(),
            });
        }
        if !dangling {
            if let Ok(table) = faults.resolve(corpus) {
                stats.f_unique = Some(table.unique_detected(0..corpus.m()));
                stats.rl = redundancy_level(&table, None).ok();
            }
        }
    }
    ValidationReport { errors, warnings, stats }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tc(id: &str, reqs: &[&str], steps: &[&str]) -> TestCase {
        TestCase {
            id: id.into(),
            requirement_ids: reqs.iter().map(|s| s.to_string()).collect(),
            steps: steps.iter().map(|s| s.to_string()).collect(),
        }
    }

    const SMALL: &str = r#"{"requirements":["R1","R2"]}
{"id":"TC1","requirement_ids":["R1"],"steps":["Read variable Variable_A"]}
{"id":"TC2","requirement_ids":["R2"],"steps":["Set System variable Variable_1 = 1"]}
{"id":"TC3","requirement_ids":["R2"],"steps":["Send request PATH_TO_REQUEST_A","Check expected diagnostic response"]}
"#;

    #[test]
    fn parses_counts_and_order() {
        let c = Corpus::from_jsonl(SMALL).unwrap();
        assert_eq!(c.m(), 3);
        assert_eq!(c.n_req(), 2);
        assert_eq!(c.index_of("TC3"), Some(2));
        assert_eq!(c.cases_for(1), &[1, 2]);
        assert_eq!(c.test_cases()[2].raw_text(), "Send request PATH_TO_REQUEST_A\nCheck expected diagnostic response");
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let text = r#"{"requirements":["R1"]}
{"id":"TC1","requirement_ids":["R1"],"steps":["a"]}
{"id":"TC1","requirement_ids":["R1"],"steps":["b"]}"#;
        match Corpus::from_jsonl(text) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "TC1"),
            other => panic!("expected duplicate id, got {other:?}"),
        }
    }

    #[test]
    fn unknown_requirement_is_rejected() {
        let text = r#"{"requirements":["R1"]}
{"id":"TC1","requirement_ids":["R9"],"steps":["a"]}"#;
        assert!(matches!(Corpus::from_jsonl(text), Err(Error::UnknownRequirement { .. })));
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = "{\"requirements\":[\"R1\"]}\n\n{\"id\":\"TC1\",\"steps\":[\"a\"]}";
        match Corpus::from_jsonl(text) {
            Err(Error::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed record, got {other:?}"),
        }
    }

    #[test]
    fn ids_are_case_sensitive() {
        let c = Corpus::new(
            vec!["R1".into()],
            vec![tc("tc1", &["R1"], &["a"]), tc("TC1", &["R1"], &["b"])],
        )
        .unwrap();
        assert_eq!(c.m(), 2);
    }

    #[test]
    fn redundancy_level_worked_example() {
        // three cases detecting 3, 5 and 3 faults, 4 unique faults overall
        assert!((redundancy_ratio(3 + 5 + 3, 4).unwrap() - 2.75).abs() < 1e-12);
        assert!((redundancy_ratio(2610, 220).unwrap() - 11.8636).abs() < 1e-4);
    }

    #[test]
    fn redundancy_level_without_redundancy_is_one() {
        let table = FaultTable::from_lists(3, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(redundancy_level(&table, None).unwrap(), 1.0);
        assert_eq!(redundancy_level(&table, Some(&[0, 2])).unwrap(), 1.0);
    }

    #[test]
    fn redundancy_level_of_faultless_subset_is_an_error() {
        let table = FaultTable::from_lists(1, vec![vec![0], vec![]]);
        assert!(matches!(redundancy_level(&table, Some(&[1])), Err(Error::NoFaultsDetected)));
    }

    #[test]
    fn jaccard_examples() {
        let s = |v: &[u32]| v.iter().copied().collect::<BTreeSet<_>>();
        assert_eq!(jaccard(&s(&[1, 2]), &s(&[1, 2])).unwrap(), 1.0);
        assert_eq!(jaccard(&s(&[1, 2]), &s(&[3])).unwrap(), 0.0);
        assert_eq!(jaccard(&s(&[1, 2, 3]), &s(&[2, 3, 4])).unwrap(), 0.5);
        assert!(matches!(jaccard(&s(&[]), &s(&[])), Err(Error::EmptySets)));
    }

    #[test]
    fn validation_findings() {
        let c = Corpus::new(
            vec!["R1".into(), "R2".into(), "R3".into()],
            vec![tc("TC1", &["R1"], &["a"]), tc("TC2", &["R1", "R2"], &["b"]), tc("TC3", &[], &[])],
        )
        .unwrap();
        let mut fm = FaultMatrix::default();
        fm.detects.insert("TC1".into(), ["F1".to_string()].into());
        fm.detects.insert("TC9".into(), ["F2".to_string()].into());
        let report = validate_corpus(&c, Some(&fm));
        assert!(report.has_error(FindingCode::UncoveredRequirement));
        assert!(report.has_error(FindingCode::DanglingFaultRef));
        assert!(report.has_error(FindingCode::EmptyCover));
        assert!(report.has_error(FindingCode::EmptySteps));
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(report.warnings[0].code, FindingCode::MultiCover);
    }

    #[test]
    fn fully_covered_corpus_validates_cleanly() {
        let c = Corpus::from_jsonl(SMALL).unwrap();
        let fm = FaultMatrix::from_jsonl(
            "{\"test_case_id\":\"TC1\",\"fault_ids\":[\"F1\",\"F2\"]}\n{\"test_case_id\":\"TC3\",\"fault_ids\":[\"F2\"]}\n",
        )
        .unwrap();
        let report = validate_corpus(&c, Some(&fm));
        assert!(report.is_ok(), "{report:?}");
        assert_eq!(report.stats.f_unique, Some(2));
        assert_eq!(report.stats.rl, Some(1.5));
    }

    #[test]
    fn fault_matrix_round_trip() {
        let c = Corpus::from_jsonl(SMALL).unwrap();
        let text = "{\"test_case_id\":\"TC3\",\"fault_ids\":[\"F2\"]}\n{\"test_case_id\":\"TC1\",\"fault_ids\":[\"F2\",\"F1\"]}\n";
        let fm = FaultMatrix::from_jsonl(text).unwrap();
        let again = FaultMatrix::from_jsonl(&fm.to_jsonl(&c)).unwrap();
        assert_eq!(fm, again);
        let table = fm.resolve(&c).unwrap();
        assert_eq!(table.n_faults(), 2);
        assert_eq!(table.detected_by(0), &[0, 1]);
        assert!(table.detected_by(1).is_empty());
    }

    #[test]
    fn subset_keeps_only_traced_requirements() {
        let c = Corpus::from_jsonl(SMALL).unwrap();
        let s = c.subset(&[2, 1]);
        assert_eq!(s.requirements(), &["R2".to_string()]);
        assert_eq!(s.test_cases()[0].id, "TC3");
    }
}
