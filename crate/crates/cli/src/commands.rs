use std::path::Path;

use measkit::channels::{induced_povm, luders_instrument, Instrument};
use measkit::compat::{
    joint_instrument_feasibility, joint_povm_feasibility, CompatReport, SolverOptions, Verdict,
};
use measkit::linalg::{ComplexMatrix, DensityOperator, Povm, UnitaryOperator, C64};
use measkit::pointer::{
    eta_sweep, induced_effects_numeric, PointerConfig, PointerGrid, SharpnessResult, ShiftSign,
};
use measkit::records::{
    build_wigner_friend_weak, compare_to_born, sample as sample_log, scenario_povm_verdict,
    scenario_verdict, EventLog, WignerBasis, ZScore,
};
use measkit::tomography::{
    estimate_eta, eta_of, kappa_sweep, qubit_probes, simulate_counts, KappaPoint, TomographyResult,
};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::output::{csv, emit, num, text, CliError};
use crate::{
    BasisArg, Cli, Command, CompatArgs, EtaSweepArgs, Format, InduceArgs, JointInstrumentArgs,
    SampleArgs, ShiftArg, SolverArgs, TomoArgs, WignerFriendArgs,
};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::EtaSweep(a) => eta_sweep_cmd(cli, a),
        Command::Induce(a) => induce_cmd(cli, a),
        Command::Compat(a) => compat_cmd(cli, a),
        Command::JointInstrument(a) => joint_instrument_cmd(cli, a),
        Command::Sample(a) => sample_cmd(cli, a),
        Command::Tomo(a) => tomo_cmd(cli, a),
        Command::WignerFriend(a) => wigner_friend_cmd(cli, a),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// A measurement file is either an instrument (has "branches") or a POVM.
enum Measurement {
    Povm(Povm),
    Instrument(Instrument),
}

fn read_measurement(path: &Path) -> Result<Measurement, CliError> {
    let v: serde_json::Value = read_json(path)?;
    let parsed = if v.get("branches").is_some() {
        serde_json::from_value(v).map(Measurement::Instrument)
    } else {
        serde_json::from_value(v).map(Measurement::Povm)
    };
    parsed.map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn read_instrument(path: &Path) -> Result<Instrument, CliError> {
    Ok(match read_measurement(path)? {
        Measurement::Instrument(i) => i,
        Measurement::Povm(p) => luders_instrument(&p)?,
    })
}

fn solver_options(s: &SolverArgs) -> Result<SolverOptions, CliError> {
    if !(s.tol.is_finite() && s.tol > 0.0) {
        return Err(CliError::Validation(format!(
            "--tol must be positive, got {}",
            s.tol
        )));
    }
    if s.max_iter == 0 {
        return Err(CliError::Validation("--max-iter must be positive".into()));
    }
    Ok(SolverOptions {
        max_iter: s.max_iter,
        tol: s.tol,
        ..SolverOptions::default()
    })
}

fn qubit_state(psi: [C64; 2]) -> DensityOperator {
    DensityOperator::pure(&psi).expect("normalized keyword state")
}

/// Keyword qubit state or a density-matrix JSON path.
fn parse_state(s: &str) -> Result<DensityOperator, CliError> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
    Ok(match s {
        "0" => qubit_state([o, z]),
        "1" => qubit_state([z, o]),
        "+" => qubit_state([C64::new(h, 0.0), C64::new(h, 0.0)]),
        "-" => qubit_state([C64::new(h, 0.0), C64::new(-h, 0.0)]),
        "+i" => qubit_state([C64::new(h, 0.0), C64::new(0.0, h)]),
        "-i" => qubit_state([C64::new(h, 0.0), C64::new(0.0, -h)]),
        "mixed" => DensityOperator::maximally_mixed(2)?,
        path => read_json(Path::new(path))?,
    })
}

fn parse_axis(s: &str) -> Result<[f64; 3], CliError> {
    let v = match s {
        "x" => [1.0, 0.0, 0.0],
        "y" => [0.0, 1.0, 0.0],
        "z" => [0.0, 0.0, 1.0],
        other => {
            let parts: Vec<f64> = other
                .split(',')
                .map(|p| p.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| {
                    CliError::Validation(format!("axis {other:?}: expected x, y, z or a,b,c"))
                })?;
            let [a, b, c] = parts[..] else {
                return Err(CliError::Validation(format!(
                    "axis {other:?} needs three components"
                )));
            };
            [a, b, c]
        }
    };
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(CliError::Validation(format!("axis {s:?} has no direction")));
    }
    Ok(v.map(|x| x / norm))
}

fn eta_sweep_cmd(cli: &Cli, a: &EtaSweepArgs) -> Result<(), CliError> {
    let table = eta_sweep(&a.kappa, &a.delta)?;
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.kappa),
                num(r.delta),
                num(r.eta_analytic),
                num(r.eta_numeric),
                num(r.abs_diff),
            ]
        })
        .collect();
    let body = csv(
        &["kappa", "delta", "eta_analytic", "eta_numeric", "abs_diff"],
        &rows,
    );
    emit(cli, "eta-sweep", &table, Some(body), Format::Csv)
}

#[derive(Serialize)]
struct InduceOutput {
    source: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pointer: Option<PointerConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sharpness: Option<SharpnessResult>,
    povm: Povm,
}

/// Long form: one row per matrix entry of each effect.
fn povm_csv(p: &Povm) -> String {
    let mut rows = Vec::new();
    for (label, e) in p.labels().iter().zip(p.effects()) {
        let m = e.matrix();
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let z = m[(i, j)];
                rows.push(vec![
                    text(label),
                    i.to_string(),
                    j.to_string(),
                    num(z.re),
                    num(z.im),
                ]);
            }
        }
    }
    csv(&["label", "row", "col", "re", "im"], &rows)
}

fn induce_cmd(cli: &Cli, a: &InduceArgs) -> Result<(), CliError> {
    let out = match (a.kappa, a.delta, &a.unitary) {
        (Some(kappa), Some(delta), None) => {
            let mut cfg = PointerConfig::new(kappa, delta)?;
            if let Some(n) = a.n_points {
                let grid = PointerGrid {
                    n_points: n,
                    ..cfg.grid
                };
                cfg = PointerConfig::with_grid(kappa, delta, grid)?;
            }
            cfg = cfg.with_shift_sign(match a.shift_sign {
                ShiftArg::UpToPositive => ShiftSign::UpToPositive,
                ShiftArg::UpToNegative => ShiftSign::UpToNegative,
            });
            let (povm, sharpness) = induced_effects_numeric(&cfg)?;
            InduceOutput {
                source: "pointer",
                pointer: Some(cfg),
                sharpness: Some(sharpness),
                povm,
            }
        }
        (None, None, Some(u_path)) => {
            let (Some(app), Some(ro)) = (&a.apparatus, &a.readout) else {
                return Err(CliError::Validation(
                    "--unitary needs --apparatus and --readout".into(),
                ));
            };
            let u: UnitaryOperator = read_json(u_path)?;
            let sigma: DensityOperator = read_json(app)?;
            let readout: Povm = read_json(ro)?;
            InduceOutput {
                source: "unitary",
                pointer: None,
                sharpness: None,
                povm: induced_povm(&u, &sigma, &readout)?,
            }
        }
        _ => {
            return Err(CliError::Validation(
                "give either --kappa and --delta, or --unitary, --apparatus and --readout".into(),
            ))
        }
    };
    let body = povm_csv(&out.povm);
    emit(cli, "induce", &out, Some(body), Format::Json)
}

fn report_csv(rows: &[(&str, &CompatReport)]) -> String {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            vec![
                text(name),
                verdict_name(r.verdict).to_string(),
                num(r.witness_margin),
                r.iterations.to_string(),
                num(r.tolerance),
            ]
        })
        .collect();
    csv(
        &[
            "check",
            "verdict",
            "witness_margin",
            "iterations",
            "tolerance",
        ],
        &rows,
    )
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::Compatible => "compatible",
        Verdict::Incompatible => "incompatible",
        Verdict::Undecided => "undecided",
    }
}

/// Writes the report, then maps an undecided verdict to exit code 2.
fn emit_report(cli: &Cli, name: &str, report: &CompatReport) -> Result<(), CliError> {
    emit(
        cli,
        name,
        report,
        Some(report_csv(&[(name, report)])),
        Format::Json,
    )?;
    if report.verdict == Verdict::Undecided {
        return Err(CliError::Undecided);
    }
    Ok(())
}

fn compat_cmd(cli: &Cli, a: &CompatArgs) -> Result<(), CliError> {
    let opts = solver_options(&a.solver)?;
    let report = match (read_measurement(&a.a)?, read_measurement(&a.b)?) {
        (Measurement::Povm(p), Measurement::Povm(q)) => joint_povm_feasibility(&p, &q, &opts)?,
        (Measurement::Instrument(i), Measurement::Instrument(j)) => {
            joint_instrument_feasibility(&i, &j, &opts)?
        }
        _ => {
            return Err(CliError::Validation(
                "compat needs two POVMs or two instruments; use joint-instrument to mix them"
                    .into(),
            ))
        }
    };
    emit_report(cli, "compat", &report)
}

fn joint_instrument_cmd(cli: &Cli, a: &JointInstrumentArgs) -> Result<(), CliError> {
    let opts = solver_options(&a.solver)?;
    let i = read_instrument(&a.i)?;
    let j = match &a.j {
        Some(p) => read_instrument(p)?,
        None => i.coarse_grained("1"),
    };
    let report = joint_instrument_feasibility(&i, &j, &opts)?;
    emit_report(cli, "joint-instrument", &report)
}

#[derive(Serialize)]
struct SampleOutput {
    log: EventLog,
    born: Vec<ZScore>,
    max_abs_z: f64,
}

fn sample_cmd(cli: &Cli, a: &SampleArgs) -> Result<(), CliError> {
    let ins = match (&a.instrument, a.eta) {
        (Some(path), None) => read_instrument(path)?,
        (None, Some(eta)) => luders_instrument(&Povm::unsharp_qubit(eta, parse_axis(&a.axis)?)?)?,
        _ => {
            return Err(CliError::Validation(
                "give an instrument file or --eta".into(),
            ))
        }
    };
    let rho = parse_state(&a.state)?;
    let reference = match &a.compare_state {
        Some(s) => parse_state(s)?,
        None => rho.clone(),
    };
    let log = sample_log(&ins, &rho, a.shots, cli.seed)?;
    let born = compare_to_born(&log, &ins, &reference)?;
    let max_abs_z = born.iter().map(|z| z.z.abs()).fold(0.0, f64::max);
    let rows: Vec<Vec<String>> = born
        .iter()
        .map(|z| {
            vec![
                text(&z.label),
                z.count.to_string(),
                num(z.frequency),
                num(z.probability),
                num(z.z),
            ]
        })
        .collect();
    let body = csv(
        &["label", "count", "frequency", "born_probability", "z"],
        &rows,
    );
    let out = SampleOutput {
        log,
        born,
        max_abs_z,
    };
    emit(cli, "sample", &out, Some(body), Format::Json)
}

#[derive(Serialize)]
#[serde(tag = "source", rename_all = "lowercase")]
enum TomoOutput {
    Pointer {
        delta: f64,
        shots_per_probe: u64,
        resamples: usize,
        points: Vec<KappaPoint>,
    },
    Povm {
        eta_true: f64,
        resamples: usize,
        result: TomographyResult,
    },
}

fn tomo_cmd(cli: &Cli, a: &TomoArgs) -> Result<(), CliError> {
    let header = ["kappa", "delta", "eta_true", "eta_hat", "stderr"];
    let (out, body) = match &a.povm {
        None => {
            let points = kappa_sweep(&a.kappa, a.delta, a.shots, a.resamples, cli.seed)?;
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| {
                    vec![
                        num(p.kappa),
                        num(p.delta),
                        num(p.eta_true),
                        num(p.eta_hat),
                        num(p.stderr),
                    ]
                })
                .collect();
            let body = csv(&header, &rows);
            let out = TomoOutput::Pointer {
                delta: a.delta,
                shots_per_probe: a.shots,
                resamples: a.resamples,
                points,
            };
            (out, body)
        }
        Some(path) => {
            let truth: Povm = read_json(path)?;
            let probes = qubit_probes();
            let table = simulate_counts(&truth, &probes, a.shots, cli.seed)?;
            let result = estimate_eta(&table, &probes, a.resamples, cli.seed)?;
            let eta_true = eta_of(&truth)?;
            let row = vec![
                String::new(),
                String::new(),
                num(eta_true),
                num(result.eta_hat),
                num(result.eta_stderr),
            ];
            let body = csv(&header, &[row]);
            let out = TomoOutput::Povm {
                eta_true,
                resamples: a.resamples,
                result,
            };
            (out, body)
        }
    };
    emit(cli, "tomo", &out, Some(body), Format::Json)
}

#[derive(Serialize)]
struct Distribution {
    labels: Vec<String>,
    probabilities: Vec<f64>,
}

#[derive(Serialize)]
struct WignerFriendOutput {
    theta: f64,
    basis: WignerBasis,
    system_state: ComplexMatrix,
    friend: Distribution,
    wigner: Distribution,
    instrument_verdict: CompatReport,
    povm_verdict: CompatReport,
}

fn wigner_friend_cmd(cli: &Cli, a: &WignerFriendArgs) -> Result<(), CliError> {
    let opts = solver_options(&a.solver)?;
    let basis = match a.basis {
        BasisArg::Bell => WignerBasis::Bell,
        BasisArg::Record => WignerBasis::Record,
    };
    let state = parse_state(&a.state)?;
    let sc = build_wigner_friend_weak(state, a.theta, basis)?;
    let out = WignerFriendOutput {
        theta: a.theta,
        basis,
        system_state: sc.system_state.matrix().clone(),
        friend: Distribution {
            labels: sc.friend_instrument.labels(),
            probabilities: sc.friend_probabilities()?,
        },
        wigner: Distribution {
            labels: sc.wigner_instrument.labels(),
            probabilities: sc.wigner_probabilities()?,
        },
        instrument_verdict: scenario_verdict(&sc, &opts)?,
        povm_verdict: scenario_povm_verdict(&sc, &opts)?,
    };
    let body = report_csv(&[
        ("instrument", &out.instrument_verdict),
        ("povm", &out.povm_verdict),
    ]);
    emit(cli, "wigner-friend", &out, Some(body), Format::Json)?;
    if out.instrument_verdict.verdict == Verdict::Undecided
        || out.povm_verdict.verdict == Verdict::Undecided
    {
        return Err(CliError::Undecided);
    }
    Ok(())
}
