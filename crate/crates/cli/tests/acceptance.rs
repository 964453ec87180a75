//! Acceptance suite: one PASS/FAIL line per criterion.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fecim::analysis::{
    average_ceq_ratio, default_p_grid, energy_report, mac_energy, run_onoff_error_mc,
    run_sigma_mac_mc, sram_equivalent_capacitance, McSetup,
};
use fecim::bnn::synthetic::{prototype_task, random_input, random_model, PrototypeTask};
use fecim::bnn::{evaluate_accuracy, reference_infer, Deployment, MacroConfig};
use fecim::rng::{Domain, ElementKey, SeedTree};
use fecim::{
    equivalent_capacitance, BitMatrix, FeFetParams, MacStimulus, MacroArray, OnOffRatio,
    VariationSpec, XnorModel, FEMTO,
};
use rand::seq::SliceRandom;
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, u64, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration, result: Outcome) -> Outcome {
    let note = format!("{:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs());
    match result {
        Ok(d) if elapsed <= limit => Ok(format!("{d}; {note}")),
        Ok(d) => Err(format!("{d}; too slow, {note}")),
        Err(d) => Err(format!("{d}; {note}")),
    }
}

/// Supply charge for M plates at VDD and N - M at GND, solved as a
/// two-node network with a floating, initially uncharged ScL.
fn charge_oracle(m: usize, n: usize, c: f64, v_dd: f64) -> f64 {
    let c_high = m as f64 * c;
    let c_low = (n - m) as f64 * c;
    // Charge neutrality on ScL: c_high (v - VDD) + c_low v = 0.
    let v = c_high * v_dd / (c_high + c_low);
    c_high * (v_dd - v) / v_dd
}

fn criterion_1() -> Outcome {
    let c = 1.2 * FEMTO;
    let mut worst = 0.0f64;
    for m in 0..=128usize {
        let got = equivalent_capacitance(m, 128, c).map_err(|e| e.to_string())?;
        let closed = m as f64 * (128 - m) as f64 * c / 128.0;
        if got != closed {
            return Err(format!("M={m}: {got} vs closed form {closed}"));
        }
        let oracle = charge_oracle(m, 128, c, 0.45);
        if oracle != 0.0 {
            worst = worst.max(((got - oracle) / oracle).abs());
        } else if got != 0.0 {
            return Err(format!("M={m}: oracle 0, got {got}"));
        }
    }
    check(
        worst < 1e-12,
        format!("max relative deviation from charge oracle {worst:.1e}"),
    )
}

fn criterion_2() -> Outcome {
    let c = 1.2 * FEMTO;
    let half = energy_report(64, 128, c, 0.45).map_err(|e| e.to_string())?;
    let ratio = half.c_eq_proposed / sram_equivalent_capacitance(64, c);
    let avg = average_ceq_ratio(128).map_err(|e| e.to_string())?;
    check(
        ratio == 0.5 && half.ratio == Some(0.5) && (avg - 127.0 / 384.0).abs() <= 1e-6,
        format!("ratio at p=0.5 {ratio}, uniform average {avg:.7}"),
    )
}

fn criterion_3() -> Outcome {
    let setup = McSetup {
        params: FeFetParams::default(),
        c_nominal: 1.2 * FEMTO,
        spec: VariationSpec {
            sigma_c: 0.05,
            on_off_ratio: OnOffRatio::Infinite,
            ..VariationSpec::default()
        },
        n: 128,
    };
    let r = run_sigma_mac_mc(&setup, &default_p_grid(), 100_000).map_err(|e| e.to_string())?;
    let half = r
        .p_grid
        .iter()
        .position(|&p| p == 0.5)
        .expect("grid holds 0.5");
    let s = r.sigma_mac[half];
    let is_max = r.sigma_mac.iter().all(|&x| x <= s);
    let mut worst = 0.0f64;
    for (m, t) in r.sigma_mac.iter().zip(&r.theory) {
        if *t == 0.0 {
            if *m != 0.0 {
                return Err(format!("nonzero spread {m} where theory is 0"));
            }
        } else {
            worst = worst.max((m / t - 1.0).abs());
        }
    }
    check(
        (0.0020..=0.0025).contains(&s) && is_max && worst <= 0.10,
        format!(
            "sigma_MAC(0.5) = {:.4}%, grid max {is_max}, worst deviation from theory {:.1}%",
            100.0 * s,
            100.0 * worst
        ),
    )
}

fn criterion_4() -> Outcome {
    let setup = |ratio: f64| McSetup {
        params: FeFetParams::default(),
        c_nominal: 1.2 * FEMTO,
        spec: VariationSpec {
            sigma_c: 0.05,
            sigma_r: 0.15,
            on_off_ratio: OnOffRatio::Finite(ratio),
            ..VariationSpec::default()
        },
        n: 128,
    };
    let grid = default_p_grid();
    let hi = run_onoff_error_mc(&setup(1e5), &grid, 100_000).map_err(|e| e.to_string())?;
    let lo = run_onoff_error_mc(&setup(1e2), &grid, 100_000).map_err(|e| e.to_string())?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (m_hi, m_lo) = (mean(&hi.mean_abs_error), mean(&lo.mean_abs_error));
    check(
        (0.985..=0.997).contains(&hi.q_pooled) && m_lo >= 10.0 * m_hi,
        format!(
            "ratio 1e5: P(|e| < 1/128) = {:.4}; mean |e| {:.3}% at 1e2 vs {:.4}% at 1e5 ({:.1}x)",
            hi.q_pooled,
            100.0 * m_lo,
            100.0 * m_hi,
            m_lo / m_hi
        ),
    )
}

fn criterion_5() -> Outcome {
    let params = FeFetParams::default();
    let blank = MacroArray::new(128, 128, params, 1.2 * FEMTO);
    let mut pulses = 0u64;
    for run in 0..100u64 {
        let mut rng =
            SeedTree::new(0xacce).stream(Domain::Weights, ElementKey::default().with_trial(run));
        let density: f64 = rng.random_range(0.0..=1.0);
        let w = BitMatrix::from_fn(128, 128, |_, _| rng.random_bool(density));
        let (array, audit) = blank.program(&w).map_err(|e| format!("run {run}: {e}"))?;
        if audit.forbidden != 0 {
            return Err(format!(
                "run {run}: {} pulses in the forbidden band",
                audit.forbidden
            ));
        }
        if let Some((m, _)) = audit
            .histogram
            .iter()
            .find(|(m, _)| *m > params.disturb_margin && *m < params.v_write)
        {
            return Err(format!("run {run}: |V_GS| = {m}"));
        }
        if array.read_back() != w {
            return Err(format!("run {run}: read-back differs"));
        }
        pulses += audit.pulses;
    }
    Ok(format!(
        "100 runs, {pulses} pulses, none in (V_write/2, V_write), read-back exact"
    ))
}

fn criterion_6() -> Outcome {
    let nominal = FeFetParams::default();
    let v_dd = nominal.v_dd;
    let mut rng = SeedTree::new(6).stream(Domain::Stimulus, ElementKey::default());
    let w = BitMatrix::from_fn(128, 1, |_, _| rng.random());
    let (array, _) = MacroArray::new(128, 1, nominal, 1.2 * FEMTO)
        .program(&w)
        .map_err(|e| e.to_string())?;
    let high_ratio = FeFetParams::new(1.5, v_dd, 10e3, 10e3 * 1e9);
    let (divider, _) = MacroArray::new(128, 1, high_ratio, 1.2 * FEMTO)
        .program(&w)
        .map_err(|e| e.to_string())?;
    let mut rows: Vec<usize> = (0..128).collect();
    let mut worst_div = 0.0f64;
    for shuffle in 0..1000usize {
        let m = shuffle % 129;
        rows.shuffle(&mut rng);
        let mut bits = vec![false; 128];
        for (k, &r) in rows.iter().enumerate() {
            bits[r] = if k < m { w.get(r, 0) } else { !w.get(r, 0) };
        }
        let stim = MacStimulus::from_bits(&bits, v_dd);
        let ideal = array
            .mac_evaluate(&stim, XnorModel::Ideal)
            .map_err(|e| e.to_string())?;
        let want = v_dd * m as f64 / 128.0;
        if ideal.v_scl[0] != want || ideal.match_counts[0] != m {
            return Err(format!("M={m}: V_ScL {} != {want}", ideal.v_scl[0]));
        }
        let d = divider
            .mac_evaluate(&stim, XnorModel::Divider)
            .map_err(|e| e.to_string())?;
        worst_div = worst_div.max((d.v_scl[0] - want).abs());
    }
    check(
        worst_div <= v_dd * 1e-6,
        format!(
            "1000 shuffles over M = 0..=128 exact; divider at ratio 1e9 within {worst_div:.2e} V"
        ),
    )
}

fn criterion_7() -> Outcome {
    let tilings = [(5, 3), (16, 8), (48, 32)];
    let spec = VariationSpec::ideal(7);
    let mut multi_tile = 0;
    for seed in 0..1000u64 {
        let model = random_model(10_000 + seed);
        let x = random_input(&model, seed, 0);
        let want = reference_infer(&model, &x).map_err(|e| e.to_string())?;
        for &(rows, cols) in &tilings {
            let config = MacroConfig {
                rows,
                cols,
                ..MacroConfig::default()
            };
            let (dep, _) = Deployment::program(&model, config).map_err(|e| e.to_string())?;
            multi_tile += dep
                .layers()
                .iter()
                .filter(|l| l.plan.tiles.len() > 1)
                .count();
            let got = dep
                .instance(&spec, 0)
                .and_then(|c| c.infer(&model, &x))
                .map_err(|e| e.to_string())?;
            if got != want {
                return Err(format!(
                    "model {seed}, macro {rows}x{cols}: trace differs from reference"
                ));
            }
        }
    }
    Ok(format!(
        "1000 models x {} tilings bit-identical (labels and every layer's signs); {multi_tile} split layers",
        tilings.len()
    ))
}

fn criterion_8() -> Outcome {
    let (model, data) = prototype_task(7, &PrototypeTask::default()).map_err(|e| e.to_string())?;
    let (dep, _) =
        Deployment::program(&model, MacroConfig::default()).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (0..10).map(|k| k as f64 * 0.05).collect();
    let table = evaluate_accuracy(&model, &dep, &data, &VariationSpec::ideal(11), &grid, 30)
        .map_err(|e| e.to_string())?;
    let means: Vec<f64> = table.summary.iter().map(|s| s.mean).collect();
    let base = means[0];
    let drop = |sigma: f64| {
        let i = grid
            .iter()
            .position(|&g| (g - sigma).abs() < 1e-12)
            .expect("grid point");
        100.0 * (base - means[i])
    };
    let monotone = means.windows(2).all(|w| w[1] <= w[0]);
    let curve: Vec<String> = means.iter().map(|m| format!("{:.2}", 100.0 * m)).collect();
    check(
        base == table.reference_accuracy && drop(0.05) < 0.5 && drop(0.30) < 2.0 && monotone,
        format!(
            "drop {:.3} pts at 5%, {:.3} pts at 30%, monotone {monotone}; accuracy % over sigma_c 0..0.45: {}",
            drop(0.05),
            drop(0.30),
            curve.join(" ")
        ),
    )
}

fn run_cli(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_fecim"))
        .args(args)
        .env_remove("FECIM_CONFIG")
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = tmp.path().join("run.toml");
    fs::write(
        &cfg,
        "seed = 42\n[sweep]\nsigma_c_grid = [0.0, 0.05]\non_off_ratios = [1e2, 1e5]\n\
         [bnn]\nsigma_c_grid = [0.0, 0.3]\ntrials = 3\n[bnn.synthetic]\nsamples = 60\n",
    )
    .map_err(|e| e.to_string())?;
    let cfg = cfg.to_str().expect("utf-8 path");
    let commands = [
        "mac-sweep",
        "variation",
        "energy-compare",
        "bnn",
        "write-sim",
    ];
    let mut files = 0;
    for cmd in commands {
        for threads in ["1", "4"] {
            let out = format!("{cmd}-{threads}");
            let mut args = vec![cmd, "--config", cfg, "--threads", threads, "--out", &out];
            if cmd == "variation" {
                args.extend(["--trials", "10000"]);
            }
            run_cli(&args, tmp.path())?;
        }
        let a = tmp.path().join(format!("{cmd}-1"));
        let mut names: Vec<_> = fs::read_dir(&a)
            .map_err(|e| e.to_string())?
            .map(|e| e.map(|e| e.file_name()).map_err(|e| e.to_string()))
            .collect::<Result<_, _>>()?;
        names.sort();
        for name in names {
            let x = fs::read(a.join(&name)).map_err(|e| e.to_string())?;
            let y = fs::read(tmp.path().join(format!("{cmd}-4")).join(&name))
                .map_err(|e| e.to_string())?;
            if x != y {
                return Err(format!(
                    "{cmd}: {} differs between 1 and 4 threads",
                    name.to_string_lossy()
                ));
            }
            files += 1;
        }
    }
    Ok(format!(
        "{} commands, {files} files byte-identical at 1 and 4 threads",
        commands.len()
    ))
}

fn criterion_10() -> Outcome {
    let c_eq = equivalent_capacitance(64, 128, 1.2 * FEMTO).map_err(|e| e.to_string())?;
    let low = mac_energy(c_eq, 0.45).map_err(|e| e.to_string())?;
    let high = mac_energy(c_eq, 0.90).map_err(|e| e.to_string())?;
    check(
        high == 4.0 * low && criterion_2().is_ok(),
        format!("E(0.90 V) = {high:.4e} J = 4 x E(0.45 V) = 4 x {low:.4e} J; load ratios hold"),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "equivalent capacitance exactness", 1, criterion_1),
        (2, "proposed/SRAM load ratios", 1, criterion_2),
        (3, "sigma_MAC under capacitor mismatch", 60, criterion_3),
        (4, "MAC error versus on/off ratio", 120, criterion_4),
        (5, "write-protocol safety", 30, criterion_5),
        (6, "MAC linearity", 30, criterion_6),
        (7, "BNN oracle equivalence", 60, criterion_7),
        (8, "accuracy versus capacitor mismatch", 120, criterion_8),
        (9, "determinism across thread counts", 120, criterion_9),
        (10, "energy surrogate and VDD scaling", 1, criterion_10),
    ];
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        let t = Instant::now();
        let r = f();
        let r = within(t.elapsed(), Duration::from_secs(limit), r);
        match &r {
            Ok(d) => println!("PASS  criterion {id:>2}  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  criterion {id:>2}  {name}: {d}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
