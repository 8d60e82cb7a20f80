//! Acceptance suite. Prints one line per criterion and exits non-zero if any
//! fails. Pass criterion numbers to run a subset:
//! `cargo test --release --test acceptance -- 1 2 11`.

mod common;

use std::cell::OnceCell;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{finite_difference_check, model_for, open_modulation};
use qgst::autodiff::Graph;
use qgst::bench::{baseline_fit, bootstrap, evaluate_metrics, BaselineConfig, Bootstrap, BaselineFit};
use qgst::experiment::{simulate_counts, standard_design, tokenize_padded, Dataset};
use qgst::models::Model;
use qgst::params::{parametrized_kinds, ErrorParams, GateError, GateKind};
use qgst::ptm::{
    build_pauli_basis, choi_min_eigenvalue, computational_effects, noisy_gate_ptm, rotation_ptm, Axis,
};
use qgst::training::{estimate, group_dataset, train, transfer_learn, LossKind, TrainConfig};
use qgst::{Circuit, GateLabel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PTM_TOL: f64 = 1e-12;
const CHOI_TOL: f64 = -1e-9;
const CPTP_DRAWS: usize = 1000;
const FD_PARAMS: usize = 20;
const FD_TOL: f64 = 1e-4;
const ADALN_TOL: f64 = 1e-12;
const BASELINE_EPS_REL: f64 = 0.01;
const BASELINE_P_REL: f64 = 0.05;
const TRANSFORMER_1Q_REL: f64 = 0.05;
const CI_FACTOR: f64 = 3.0;
const BOOTSTRAP_RESAMPLES: usize = 10;
const TWO_Q_EPS_REL: f64 = 0.02;
const TWO_Q_P_REL: f64 = 0.10;
const SAMPLING_REPS: u64 = 200;
const SAMPLING_SIGMAS: f64 = 4.0;
const SAMPLING_MIN_FRACTION: f64 = 0.99;

fn gate(e: f64, p: f64) -> GateError {
    GateError { over_rotation: e, depolarization: p }
}

fn truth_1q() -> ErrorParams {
    ErrorParams::new(vec![(GateKind::Gx, gate(0.1, 0.01)), (GateKind::Gy, gate(0.15, 0.01))]).unwrap()
}

fn truth_2q(x: (f64, f64), y: (f64, f64), cz: (f64, f64)) -> ErrorParams {
    ErrorParams::new(vec![
        (GateKind::Gx, gate(x.0, x.1)),
        (GateKind::Gy, gate(y.0, y.1)),
        (GateKind::Gcphase, gate(cz.0, cz.1)),
    ])
    .unwrap()
}

/// Relative errors `(name, fit, truth, rel)` in flat order.
fn relative_errors(fit: &ErrorParams, truth: &ErrorParams) -> Vec<(String, f64, f64, f64)> {
    let names = ErrorParams::flat_names(&truth.kinds());
    names
        .into_iter()
        .zip(fit.to_flat().into_iter().zip(truth.to_flat()))
        .map(|(n, (f, t))| (n, f, t, (f - t).abs() / t.abs()))
        .collect()
}

/// Checks `rel ≤ eps_tol` on over-rotations and `rel ≤ p_tol` on depolarizations.
fn within(fit: &ErrorParams, truth: &ErrorParams, eps_tol: f64, p_tol: f64) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    let n_eps = truth.kinds().len();
    for (i, (name, f, t, rel)) in relative_errors(fit, truth).into_iter().enumerate() {
        let tol = if i < n_eps { eps_tol } else { p_tol };
        ok &= rel <= tol;
        parts.push(format!("{name}={f:.5}({t}) {:.2}%", 100.0 * rel));
    }
    (ok, parts.join(", "))
}

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

/// Expensive artifacts shared between criteria.
#[derive(Default)]
struct Shared {
    data_1q: OnceCell<Dataset>,
    baseline_1q: OnceCell<BaselineFit>,
    bootstrap_1q: OnceCell<Bootstrap>,
    cl_1q: OnceCell<ErrorParams>,
    data_2q_b: OnceCell<Dataset>,
    model_2q_b: OnceCell<tempfile::TempDir>,
}

impl Shared {
    fn data_1q(&self) -> &Dataset {
        self.data_1q.get_or_init(|| common::dataset(1, 32, &truth_1q(), 10_000, 1))
    }

    fn baseline_1q(&self) -> &BaselineFit {
        self.baseline_1q.get_or_init(|| baseline_fit(self.data_1q(), None, &BaselineConfig::default()).unwrap())
    }

    fn bootstrap_1q(&self) -> &Bootstrap {
        self.bootstrap_1q.get_or_init(|| {
            let center = &self.baseline_1q().params;
            bootstrap(self.data_1q(), center, &BaselineConfig::default(), BOOTSTRAP_RESAMPLES, 100).unwrap()
        })
    }

    fn cl_1q(&self) -> &ErrorParams {
        self.cl_1q.get_or_init(|| train_and_estimate(self.data_1q(), &TrainConfig::default_for(1)))
    }

    fn data_2q_b(&self) -> &Dataset {
        self.data_2q_b.get_or_init(|| common::dataset(2, 16, &truth_2q((0.01, 0.01), (0.02, 0.01), (0.01, 0.01)), 1000, 2))
    }

    /// Directory holding `model.json`, the model trained on the second two-qubit dataset.
    fn model_2q_b(&self) -> &Path {
        self.model_2q_b
            .get_or_init(|| {
                let ds = self.data_2q_b();
                let mut model = model_for(ds, 0);
                train(&mut model, ds, &TrainConfig::default_for(2)).unwrap();
                let dir = tempfile::tempdir().unwrap();
                model.save(&dir.path().join("model.json")).unwrap();
                dir
            })
            .path()
    }
}

fn train_and_estimate(ds: &Dataset, cfg: &TrainConfig) -> ErrorParams {
    let mut model = model_for(ds, 0);
    train(&mut model, ds, cfg).unwrap();
    estimate(&model, ds).unwrap()
}

fn ptm_exactness(_: &Shared) -> Outcome {
    let m = rotation_ptm(Axis::X, FRAC_PI_2).unwrap().matrix;
    let want = [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 0.0, -1.0], [0.0, 0.0, 1.0, 0.0]];
    let dev = (0..4).flat_map(|r| (0..4).map(move |c| (r, c))).map(|(r, c)| (m[(r, c)] - want[r][c]).abs()).fold(0.0, f64::max);
    let basis = build_pauli_basis(1).unwrap();
    let effects = computational_effects(&basis);
    let e0 = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2];
    let e1 = [FRAC_1_SQRT_2, 0.0, 0.0, -FRAC_1_SQRT_2];
    let effects_exact = effects[0].coeffs.as_slice() == e0 && effects[1].coeffs.as_slice() == e1;
    Outcome::new(dev <= PTM_TOL && effects_exact, format!("max |Rx(pi/2) - expected| = {dev:.1e}, effects exact: {effects_exact}"))
}

fn cptp_suite(_: &Shared) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = f64::INFINITY;
    let mut first_row_exact = true;
    let cases = [(GateKind::Gx, "Gx@0", 1), (GateKind::Gy, "Gy@0", 1), (GateKind::Gcphase, "Gcphase@0,1", 2)];
    for (kind, label, n_qubits) in cases {
        let label: GateLabel = label.parse().unwrap();
        let basis = build_pauli_basis(n_qubits).unwrap();
        for _ in 0..CPTP_DRAWS {
            let e = rng.random_range(-1.0..=1.0);
            let p = rng.random_range(0.0..=1.0);
            let params = ErrorParams::new(vec![(kind, gate(e, p))]).unwrap();
            let ptm = noisy_gate_ptm(&label, &params, n_qubits).unwrap();
            first_row_exact &= ptm.matrix[(0, 0)] == 1.0 && (1..ptm.dim()).all(|c| ptm.matrix[(0, c)] == 0.0);
            worst = worst.min(choi_min_eigenvalue(&ptm, &basis).unwrap());
        }
    }
    Outcome::new(
        first_row_exact && worst >= CHOI_TOL,
        format!("{} draws per kind, first row exact: {first_row_exact}, min Choi eigenvalue {worst:.2e}", CPTP_DRAWS),
    )
}

fn gradient_oracle(_: &Shared) -> Outcome {
    let ds1 = common::dataset(1, 32, &truth_1q(), 10_000, 1);
    let m1 = model_for(&ds1, 0);
    let r1 = finite_difference_check(&m1, &ds1, LossKind::WeightedMse, FD_PARAMS, 1);
    let ds2 = common::dataset(2, 16, &truth_2q((0.1, 0.01), (0.15, 0.01), (0.1, 0.01)), 1000, 1);
    let m2 = open_modulation(&model_for(&ds2, 0), 3);
    let r2 = finite_difference_check(&m2, &ds2, LossKind::Kl, FD_PARAMS, 2);
    let worst = |r: &[common::FdResult]| r.iter().map(|x| x.rel_err()).fold(0.0, f64::max);
    let (w1, w2) = (worst(&r1), worst(&r2));
    Outcome::new(
        r1.len() >= FD_PARAMS && r2.len() >= FD_PARAMS && w1 < FD_TOL && w2 < FD_TOL,
        format!("1q: {} params, worst rel err {w1:.1e}; 2q: {} params, worst rel err {w2:.1e}", r1.len(), r2.len()),
    )
}

fn adaln_identity(_: &Shared) -> Outcome {
    let ds = common::dataset(2, 16, &truth_2q((0.1, 0.01), (0.15, 0.01), (0.1, 0.01)), 1000, 1);
    let model = model_for(&ds, 0);
    let (tokens, _) = tokenize_padded(&ds, model.config.l_pad).unwrap();
    let mut worst = 0.0f64;
    let mut blocks = 0;
    for group in group_dataset(&ds, model.config.group_size).unwrap().iter().take(4) {
        let mut g = Graph::new();
        let (_, trace) = model.forward_traced(&mut g, &group.input(&ds, &tokens)).unwrap();
        for (x, y) in trace {
            worst = worst.max((g.value(x) - g.value(y)).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b)));
            blocks += 1;
        }
    }
    Outcome::new(worst <= ADALN_TOL && blocks > 0, format!("{blocks} block evaluations, max |out - in| = {worst:.1e}"))
}

fn baseline_recovery(s: &Shared) -> Outcome {
    let fit = s.baseline_1q();
    let (ok, detail) = within(&fit.params, &truth_1q(), BASELINE_EPS_REL, BASELINE_P_REL);
    Outcome::new(ok, format!("{detail} after {} iterations", fit.iterations))
}

fn transformer_recovery(s: &Shared) -> Outcome {
    let fit = s.cl_1q();
    let (rel_ok, detail) = within(fit, &truth_1q(), TRANSFORMER_1Q_REL, TRANSFORMER_1Q_REL);
    let boot = s.bootstrap_1q();
    let base = s.baseline_1q().params.to_flat();
    let mut ci_ok = true;
    let mut ci = Vec::new();
    for (i, v) in fit.to_flat().iter().enumerate() {
        let ratio = (v - base[i]).abs() / boot.ci_half_width[i];
        ci_ok &= ratio <= CI_FACTOR;
        ci.push(format!("{}: {ratio:.2}x", boot.names[i]));
    }
    Outcome::new(rel_ok && ci_ok, format!("{detail}; distance to baseline in CI widths {}", ci.join(", ")))
}

fn curriculum_ordering(s: &Shared) -> Outcome {
    let ds = s.data_1q();
    let cl = s.cl_1q();
    let cfg = TrainConfig { curriculum: false, ..TrainConfig::default_for(1) };
    let no_cl = train_and_estimate(ds, &cfg);
    let a = evaluate_metrics(cl, ds).unwrap();
    let b = evaluate_metrics(&no_cl, ds).unwrap();
    let kinds = [LossKind::WeightedMse, LossKind::Kl, LossKind::Chi2];
    let ok = kinds.iter().all(|&k| b.get(k) > a.get(k));
    let detail: Vec<String> = kinds.iter().map(|&k| format!("{k} cl {:.6e} vs no-cl {:.6e}", a.get(k), b.get(k))).collect();
    Outcome::new(ok, detail.join(", "))
}

fn two_qubit(ds: &Dataset, fit: &ErrorParams) -> Outcome {
    let (ok, detail) = within(fit, ds.ground_truth.as_ref().unwrap(), TWO_Q_EPS_REL, TWO_Q_P_REL);
    Outcome::new(ok, detail)
}

fn two_qubit_dataset_1(_: &Shared) -> Outcome {
    let ds = common::dataset(2, 16, &truth_2q((0.1, 0.01), (0.15, 0.01), (0.1, 0.01)), 1000, 1);
    two_qubit(&ds, &train_and_estimate(&ds, &TrainConfig::default_for(2)))
}

fn two_qubit_dataset_2(s: &Shared) -> Outcome {
    let ds = s.data_2q_b();
    let model = Model::load(&s.model_2q_b().join("model.json")).unwrap();
    two_qubit(ds, &estimate(&model, ds).unwrap())
}

fn transfer_learning(s: &Shared) -> Outcome {
    let ds = common::dataset(2, 16, &truth_2q((0.02, 0.015), (0.01, 0.008), (0.02, 0.013)), 1000, 3);
    let cfg = TrainConfig { epochs_per_part: vec![30, 30, 60], ..TrainConfig::default_for(2) };
    let (model, _) = transfer_learn(&s.model_2q_b().join("model.json"), &ds, &cfg).unwrap();
    two_qubit(&ds, &estimate(&model, &ds).unwrap())
}

fn sampling_statistics(_: &Shared) -> Outcome {
    let gx: Circuit = "Gx@0".parse().unwrap();
    let design = standard_design(1, 1, &[gx.clone()], &[Circuit::empty()]).unwrap();
    let idx = design.circuits.iter().position(|c| *c == gx).unwrap();
    let ideal = ErrorParams::zeros(&parametrized_kinds(1));
    let shots = 10_000u64;
    let sigma = (0.25 / shots as f64).sqrt();
    let inside = (0..SAMPLING_REPS)
        .filter(|&seed| {
            let ds = simulate_counts(&design, &ideal, shots, seed).unwrap();
            (ds.frequencies(idx)[0] - 0.5).abs() <= SAMPLING_SIGMAS * sigma
        })
        .count();
    let fraction = inside as f64 / SAMPLING_REPS as f64;
    Outcome::new(fraction >= SAMPLING_MIN_FRACTION, format!("{inside}/{SAMPLING_REPS} repetitions within 4 sigma"))
}

const CLI_CONFIG: &str = r#"
[experiment]
n_qubits = 1
max_length = 4
shots = 5000
seed = 11
truth = { Gx = [0.1, 0.01], Gy = [0.15, 0.01] }

[model]
d_model = 16
n_heads = 2
n_layers = 1
ff_width = 16

[training]
epochs_per_part = [2, 2, 2]

[report]
baseline_max_iters = 500
bootstrap_resamples = 3
"#;

fn run_cli_workflow(dir: &Path) -> Result<(), String> {
    fs::write(dir.join("c.toml"), CLI_CONFIG).map_err(|e| e.to_string())?;
    let commands: [&[&str]; 7] = [
        &["gen", "--config", "c.toml", "--out", "design.txt"],
        &["simulate", "--config", "c.toml", "--out", "d.jsonl"],
        &["train", "--config", "c.toml", "--data", "d.jsonl", "--out", "m.json"],
        &["train", "--config", "c.toml", "--data", "d.jsonl", "--out", "n.json", "--no-curriculum"],
        &["train", "--config", "c.toml", "--data", "d.jsonl", "--out", "t.json", "--init", "m.json", "--epochs", "1,1"],
        &["fit-baseline", "--config", "c.toml", "--data", "d.jsonl", "--out", "b.json"],
        &["report", "--checkpoint", "m.json", "--data", "d.jsonl", "--out-dir", "r", "--compare", "n.json"],
    ];
    for args in commands {
        let out = Command::new(env!("CARGO_BIN_EXE_qgst")).current_dir(dir).args(args).output().map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn list_files(root: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().display().to_string());
            }
        }
    }
    out.sort();
    out
}

fn cli_determinism(_: &Shared) -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [a.path(), b.path()] {
        if let Err(e) = run_cli_workflow(dir) {
            return Outcome::new(false, e);
        }
    }
    let files = list_files(a.path());
    if files != list_files(b.path()) {
        return Outcome::new(false, "runs produced different file sets");
    }
    let differing: Vec<&String> =
        files.iter().filter(|f| fs::read(a.path().join(f)).unwrap() != fs::read(b.path().join(f)).unwrap()).collect();
    Outcome::new(differing.is_empty(), format!("{} artifacts compared, differing: {differing:?}", files.len()))
}

type Criterion = (usize, &'static str, fn(&Shared) -> Outcome);

const CRITERIA: [Criterion; 12] = [
    (1, "PTM exactness", ptm_exactness),
    (2, "CPTP property suite", cptp_suite),
    (3, "gradient oracle", gradient_oracle),
    (4, "adaLN-zero identity", adaln_identity),
    (5, "baseline recovery, 1 qubit", baseline_recovery),
    (6, "transformer recovery, 1 qubit with curriculum", transformer_recovery),
    (7, "curriculum beats matched no-curriculum run", curriculum_ordering),
    (8, "two-qubit dataset 1", two_qubit_dataset_1),
    (9, "two-qubit dataset 2", two_qubit_dataset_2),
    (10, "transfer learning", transfer_learning),
    (11, "sampling statistics", sampling_statistics),
    (12, "CLI determinism", cli_determinism),
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let shared = Shared::default();
    let mut failed = Vec::new();
    for (id, name, check) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let started = Instant::now();
        let outcome = check(&shared);
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} {name} ({:.1}s): {}", started.elapsed().as_secs_f64(), outcome.detail);
        if !outcome.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
