//! Synthetic requirement-traced suites with planted, clone-shared faults.
//!
//! Each requirement owns families: an original test case plus its clones.
//! A clone repeats the original's steps with one or two identifiers renamed
//! and fresh numeric values, and detects exactly the original's faults.
//! Most faults are local to one family; a few global faults are attached to
//! many families so the suite reaches the requested redundancy level.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FaultMatrix, TestCase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_req: usize,
    /// Total number of test cases.
    pub m: usize,
    pub n_faults: usize,
    pub target_rl: f64,
    /// Probability that a new test case clones an existing one of the
    /// same requirement.
    pub clone_rate: f64,
    /// Requirement sizes follow rank^-exponent.
    pub zipf_exponent: f64,
    pub min_cases_per_req: usize,
    /// Fraction of faults attached to many families.
    pub global_fault_share: f64,
    /// Local faults per requirement grow as size^exponent.
    pub local_fault_exponent: f64,
    /// Section headers, in order.
    pub step_templates: Vec<String>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_req: 54,
            m: 736,
            n_faults: 220,
            target_rl: 11.86,
            clone_rate: 0.5,
            zipf_exponent: 1.3,
            min_cases_per_req: 2,
            global_fault_share: 0.1,
            local_fault_exponent: 0.0,
            step_templates: [
                "Set Global Preconditions",
                "Set Valid Preconditions",
                "Create Fault Condition",
                "Verify DTC Maturation Time",
                "Check the DTC is Active",
                "Remove DTC Condition",
                "Verify DTC Dematuration Time",
            ]
            .map(String::from)
            .to_vec(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_req == 0 || self.min_cases_per_req == 0 {
            return bad("n_req and min_cases_per_req must be positive".into());
        }
        if self.m < self.n_req * self.min_cases_per_req {
            return bad(format!("m = {} is below n_req · min_cases_per_req", self.m));
        }
        if self.n_faults == 0 {
            return bad("n_faults must be positive".into());
        }
        if !(self.target_rl >= 1.0) {
            return bad(format!("target_rl must be at least 1, got {}", self.target_rl));
        }
        if !(0.0..1.0).contains(&self.clone_rate) || !(0.0..=1.0).contains(&self.global_fault_share) {
            return bad("clone_rate must lie in [0, 1) and global_fault_share in [0, 1]".into());
        }
        if self.step_templates.is_empty() {
            return bad("step_templates must not be empty".into());
        }
        Ok(())
    }
}

const COMPONENTS: &[&str] = &[
    "Engine", "Battery", "Brake", "Motor", "Inverter", "Cabin", "Coolant", "Fuel", "Gear", "Steering", "Wheel",
    "Door", "Seat", "Lamp", "Charger", "Valve", "Pump", "Fan", "Mirror", "Wiper",
];
const QUANTITIES: &[&str] = &[
    "Speed", "Voltage", "Current", "Temp", "Pressure", "Status", "Request", "Position", "Mode", "Level", "Torque", "Flow",
];
const FAULT_KINDS: &[&str] = &[
    "short circuit to ground",
    "short circuit to battery",
    "open circuit",
    "over voltage",
    "under voltage",
    "over temperature",
    "implausible signal",
    "communication timeout",
    "stuck high",
    "stuck low",
];

fn signal_name(index: usize) -> String {
    let c = COMPONENTS[index % COMPONENTS.len()];
    let q = QUANTITIES[index / COMPONENTS.len() % QUANTITIES.len()];
    format!("{c}{q}")
}

fn n_signals() -> usize {
    COMPONENTS.len() * QUANTITIES.len()
}

/// The random content of one original test case; clones perturb it.
#[derive(Debug, Clone)]
struct Scenario {
    /// Signal indices: read, fault, then preconditions.
    signals: Vec<usize>,
    fault_kind: usize,
    maturation_ms: u32,
    dematuration_ms: u32,
    values: Vec<u32>,
    /// Extra checks appended to the active-DTC section.
    extra_checks: usize,
    extra_await: bool,
}

impl Scenario {
    fn random<R: Rng>(rng: &mut R) -> Self {
        let count = rng.gen_range(4..=7);
        let signals = rand::seq::index::sample(rng, n_signals(), count).into_vec();
        let mut s = Scenario {
            signals,
            fault_kind: rng.gen_range(0..FAULT_KINDS.len()),
            maturation_ms: 0,
            dematuration_ms: 0,
            values: Vec::new(),
            extra_checks: rng.gen_range(0..=2),
            extra_await: rng.gen_bool(0.5),
        };
        s.reroll_values(rng);
        s
    }

    fn reroll_values<R: Rng>(&mut self, rng: &mut R) {
        self.maturation_ms = rng.gen_range(1..=20) * 50;
        self.dematuration_ms = rng.gen_range(1..=20) * 50;
        self.values = (0..self.signals.len()).map(|_| rng.gen_range(0..=3)).collect();
    }

    fn cloned<R: Rng>(&self, rng: &mut R) -> Self {
        let mut s = self.clone();
        let renames = rng.gen_range(1..=2);
        for _ in 0..renames {
            let slot = rng.gen_range(0..s.signals.len());
            let fresh = loop {
                let x = rng.gen_range(0..n_signals());
                if !s.signals.contains(&x) {
                    break x;
                }
            };
            s.signals[slot] = fresh;
        }
        s.reroll_values(rng);
        s
    }

    fn render(&self, headers: &[String], dtc: &str, path: &str) -> Vec<String> {
        let var = |k: usize| format!("Var_{}", signal_name(self.signals[k]));
        let sig = |k: usize| format!("SIG_{}", signal_name(self.signals[k]).to_uppercase());
        let read = var(0);
        let fault = var(1);
        let pre: Vec<usize> = (2..self.signals.len()).collect();
        let mut sections: Vec<Vec<String>> = vec![Vec::new(); 7];
        sections[0].push(format!("Read variable {read}"));
        for &k in &pre {
            sections[1].push(format!("Set System variable {} = {}", var(k), self.values[k]));
            sections[1].push(format!("Await Value Match Signal {} = {}", sig(k), self.values[k]));
        }
        sections[2].push(format!("Set System variable {fault} = 1"));
        sections[2].push(format!("Inject {} on {fault}", FAULT_KINDS[self.fault_kind]));
        sections[3].push(format!("Check maturation time (Expected: {} ms)", self.maturation_ms));
        sections[4].push(format!("Read variable {read}"));
        sections[4].push(format!("Send request {path}"));
        sections[4].push(format!("Check expected diagnostic response {dtc}"));
        for &k in pre.iter().take(self.extra_checks) {
            sections[4].push(format!("Check signal {} = {}", sig(k), self.values[k]));
        }
        if self.extra_await {
            sections[4].push(format!("Set System variable {} = 0", var(pre[0])));
            sections[4].push(format!("Await Value Match Signal {} = 0", var(pre[0])));
        }
        sections[5].push(format!("Set System variable {fault} = 0"));
        sections[6].push(format!("Read variable {read}"));
        sections[6].push(format!("Check dematuration time (Expected: {} ms)", self.dematuration_ms));
        sections[6].push(format!("Send request {path}"));
        sections[6].push(format!("Check expected diagnostic response {dtc}"));

        // custom header lists reuse the built-in sections in rotation
        let mut steps = Vec::new();
        for (n, header) in headers.iter().enumerate() {
            steps.push(format!("STEP {} {header}", n + 1));
            steps.extend(sections[n % sections.len()].iter().cloned());
        }
        steps
    }
}

/// Splits `total` into parts proportional to `weights` (largest remainder).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut parts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = total - parts.iter().sum::<usize>();
    for &i in order.iter().take(short) {
        parts[i] += 1;
    }
    parts
}

/// Builds a corpus and its fault matrix. Deterministic given the seed.
pub fn synth_corpus(config: &SynthConfig) -> Result<(Corpus, FaultMatrix)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n_req = config.n_req;

    let spare = config.m - n_req * config.min_cases_per_req;
    let weights: Vec<f64> = (1..=n_req).map(|r| (r as f64).powf(-config.zipf_exponent)).collect();
    let mut sizes: Vec<usize> = apportion(spare, &weights).into_iter().map(|s| s + config.min_cases_per_req).collect();
    sizes.shuffle(&mut rng);

    let req_ids: Vec<String> = (1..=n_req).map(|r| format!("REQ-{r:03}")).collect();
    let mut cases = Vec::with_capacity(config.m);
    // family of every case, and the cases of every family
    let mut families: Vec<Vec<usize>> = Vec::new();
    let mut family_req: Vec<usize> = Vec::new();
    for (r, &size) in sizes.iter().enumerate() {
        let dtc = format!("DTC_{:04X}", rng.gen_range(0x1000..0xFFFFu32));
        let path = format!("PATH_TO_REQUEST_{}", signal_name(rng.gen_range(0..n_signals())).to_uppercase());
        let mut originals: Vec<(usize, Scenario)> = Vec::new();
        for _ in 0..size {
            let scenario = if !originals.is_empty() && rng.gen_bool(config.clone_rate) {
                let (family, base) = originals.choose(&mut rng).expect("non-empty");
                families[*family].push(cases.len());
                base.cloned(&mut rng)
            } else {
                let s = Scenario::random(&mut rng);
                families.push(vec![cases.len()]);
                family_req.push(r);
                originals.push((families.len() - 1, s.clone()));
                s
            };
            cases.push(TestCase {
                id: format!("TC-{:04}", cases.len() + 1),
                requirement_ids: [req_ids[r].clone()].into(),
                steps: scenario.render(&config.step_templates, &dtc, &path),
            });
        }
    }

    let fault_ids: Vec<String> = (1..=config.n_faults).map(|f| format!("F-{f:03}")).collect();
    let n_global = ((config.n_faults as f64 * config.global_fault_share).round() as usize).min(config.n_faults);
    let n_local = config.n_faults - n_global;
    let mut family_faults: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); families.len()];

    let req_weights: Vec<f64> = sizes.iter().map(|&s| (s as f64).powf(config.local_fault_exponent)).collect();
    let per_req = apportion(n_local, &req_weights);
    let families_of: Vec<Vec<usize>> =
        (0..n_req).map(|r| (0..families.len()).filter(|&f| family_req[f] == r).collect()).collect();
    let mut next_fault = 0;
    let mut local_detections = 0;
    for r in 0..n_req {
        for _ in 0..per_req[r] {
            let &fam = families_of[r].choose(&mut rng).expect("requirement has a family");
            family_faults[fam].insert(next_fault);
            local_detections += families[fam].len();
            next_fault += 1;
        }
    }

    let target_total = (config.target_rl * config.n_faults as f64).round() as usize;
    let unsatisfiable = |why: String| Error::UnsatisfiableSynthesis(why);
    if n_global == 0 {
        let rl = local_detections as f64 / config.n_faults as f64;
        if (rl - config.target_rl).abs() > 0.05 * config.target_rl {
            return Err(unsatisfiable(format!("without global faults the level is {rl:.2}")));
        }
    } else {
        if target_total < local_detections + n_global {
            return Err(unsatisfiable(format!(
                "target level {} is below the {:.2} reached by local faults alone",
                config.target_rl,
                (local_detections + n_global) as f64 / config.n_faults as f64
            )));
        }
        let global_total = target_total - local_detections;
        if global_total > n_global * config.m {
            return Err(unsatisfiable(format!(
                "target level {} needs more detections than {} global faults can provide",
                config.target_rl, n_global
            )));
        }
        let shares = capped_shares(global_total, n_global, config.m);
        let mut order: Vec<usize> = (0..families.len()).collect();
        for share in shares {
            order.shuffle(&mut rng);
            let mut hits = 0;
            for &fam in &order {
                if hits >= share {
                    break;
                }
                family_faults[fam].insert(next_fault);
                hits += families[fam].len();
            }
            next_fault += 1;
        }
    }

    let corpus = Corpus::new(req_ids, cases)?;
    let mut detects = BTreeMap::new();
    for (fam, members) in families.iter().enumerate() {
        let faults: BTreeSet<String> = family_faults[fam].iter().map(|&f| fault_ids[f].clone()).collect();
        for &i in members {
            detects.insert(corpus.test_cases()[i].id.clone(), faults.clone());
        }
    }
    let faults = FaultMatrix { detects };

    let table = faults.resolve(&corpus)?;
    let rl = crate::corpus::redundancy_level(&table, None)?;
    if (rl - config.target_rl).abs() > 0.05 * config.target_rl {
        return Err(unsatisfiable(format!("realized level {rl:.2} misses target {}", config.target_rl)));
    }
    Ok((corpus, faults))
}

/// Heavy-tailed per-fault detection targets summing to `total`, none above
/// `cap`.
fn capped_shares(total: usize, n: usize, cap: usize) -> Vec<usize> {
    let weights: Vec<f64> = (1..=n).map(|g| (g as f64).powf(-0.7)).collect();
    let mut shares = apportion(total, &weights);
    let mut spill = 0;
    for s in shares.iter_mut() {
        if *s > cap {
            spill += *s - cap;
            *s = cap;
        }
        *s = (*s).max(1);
    }
    for s in shares.iter_mut().rev() {
        let room = cap - *s;
        let take = room.min(spill);
        *s += take;
        spill -= take;
    }
    shares
}
