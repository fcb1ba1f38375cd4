//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use openaqc::adiabatic::{adiabaticity_window, adiabatic_evolve, WindowOptions};
use openaqc::dj::{eigenvalues_analytic, optimal_runtime, superop_analytic, DjInstance, FunctionSpec};
use openaqc::evolve::{compare_states, exact_evolve, EvolveOptions, Trajectory};
use openaqc::models::{spontaneous_emission, with_transverse_dephasing};
use openaqc::operator::{devectorize, vectorize, OperatorBasis};
use openaqc::spectral::{spectrum, track_eigenvalues, track_frames, SpectralOptions, TrackOptions};
use openaqc::theorem::{check_model, uniform_grid};
use openaqc::{GeneratorFamily, Result, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn dj(f: &str, n: usize, lambda: f64) -> Result<DjInstance> {
    DjInstance::uniform(FunctionSpec::parse(f, n)?, lambda)
}

fn s_grid(points: usize) -> Vec<f64> {
    (0..points).map(|k| k as f64 / (points - 1) as f64).collect()
}

/// Generic builder against the closed-form one-qubit generator.
fn generator_equivalence() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for (f, big_f) in [("constant0", 0.0), ("balanced:2", 2.0), ("balanced:1", -2.0)] {
        for lambda in [0.0, 0.1, 0.5, 0.9] {
            let fam = dj(f, 1, lambda)?.family()?;
            for s in s_grid(21) {
                let d = fam.generator(s)?.into_matrix() - superop_analytic(s, lambda, big_f, 1.0);
                worst = worst.max(d.camax());
            }
        }
    }
    outcome(worst < 1e-12, format!("max entrywise difference {worst:.2e} (< 1e-12)"))
}

fn nearest(z: C64, set: &[C64]) -> f64 {
    set.iter().map(|w| (z - w).norm()).fold(f64::INFINITY, f64::min)
}

fn lj_spectrum() -> Result<Outcome> {
    let mut match_err = 0.0_f64;
    let mut drift = 0.0_f64;
    let mut blocks_ok = true;
    for lambda in [0.1, 0.5, 0.99] {
        let fam = dj("balanced:2", 1, lambda)?.family()?;
        let want = eigenvalues_analytic(lambda, 1.0);
        let grid = s_grid(21);
        let paths = track_eigenvalues(&grid, |s| fam.generator(s).map(|l| l.into_matrix()), &TrackOptions::default())?;
        for p in &paths {
            for g in p {
                match_err = match_err.max(nearest(*g, &want));
                drift = drift.max((g - p[0]).norm());
            }
        }
        for &s in &grid {
            let spec = spectrum(&fam.generator(s)?, &SpectralOptions::default())?;
            blocks_ok &= spec.block_count() == 4 && spec.all_one_dimensional() && spec.non_degenerate();
        }
    }
    outcome(
        match_err < 1e-10 && drift < 1e-10 && blocks_ok,
        format!("closed-form error {match_err:.2e}, drift over s {drift:.2e}, four 1-dim blocks: {blocks_ok}"),
    )
}

fn crossover_numbers() -> Result<Outcome> {
    let inst = dj("balanced:2", 1, 0.1)?;
    let fam = inst.family()?;
    let reference = eigenvalues_analytic(0.1, 1.0);
    let r = adiabaticity_window(&fam, &inst.initial_state()?, &[11.0], Some(&reference), &WindowOptions::default())?;
    let t: Vec<f64> = r.points[0].times.iter().map(|c| c.value).collect();
    let rel = (t[2] - t[3]).abs() / t[2].abs().max(t[3].abs());
    let pass = (0.70..=0.95).contains(&t[1]) && (1.22..=1.65).contains(&t[2]) && (1.22..=1.65).contains(&t[3]) && rel < 1e-6;
    outcome(pass, format!("T2c = {:.4}, T3c = {:.4}, T4c = {:.4}, |T3c - T4c|/T3c = {rel:.1e}", t[1], t[2], t[3]))
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| lo * (hi / lo).powf(k as f64 / (points - 1) as f64)).collect()
}

fn crossover_curve_shape() -> Result<Outcome> {
    let t_grid = log_grid(1.0, 2000.0, 34);
    let mut onsets = Vec::new();
    let mut notes = Vec::new();
    let mut pass = true;
    for lambda in [0.1, 0.3] {
        let inst = dj("balanced:2", 1, lambda)?;
        let fam = inst.family()?;
        let reference = eigenvalues_analytic(lambda, 1.0);
        let r = adiabaticity_window(&fam, &inst.initial_state()?, &t_grid, Some(&reference), &WindowOptions::default())?;
        onsets.push(r.divergence[1].onset.unwrap_or(f64::INFINITY));
        if lambda == 0.1 {
            let last: Vec<usize> = (0..t_grid.len()).filter(|&k| t_grid[k] >= 200.0).collect();
            let spread = |alpha: usize| {
                let v: Vec<f64> = last.iter().map(|&k| r.series(alpha)[k]).collect();
                let (lo, hi) = v.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &x| (a.min(x), b.max(x)));
                (hi - lo) / lo
            };
            let (s3, s4) = (spread(2), spread(3));
            let at11 = adiabaticity_window(&fam, &inst.initial_state()?, &[11.0], Some(&reference), &WindowOptions::default())?
                .points[0]
                .times[1]
                .value;
            let t2_end = *r.series(1).last().unwrap();
            pass &= s3 < 0.05 && s4 < 0.05 && t2_end > 10.0 * at11;
            notes.push(format!(
                "λ=0.1: T3c/T4c spread over last decade {:.2}%/{:.2}%, T2c(2000)/T2c(11) = {:.1e}",
                100.0 * s3,
                100.0 * s4,
                t2_end / at11
            ));
        }
    }
    pass &= onsets[1] < onsets[0];
    notes.push(format!("T2c divergence onset λ=0.3: {:.1}, λ=0.1: {:.1}", onsets[1], onsets[0]));
    outcome(pass, notes.join("; "))
}

fn state_error(traj: &Trajectory, want: &openaqc::OperatorMatrix, basis: &OperatorBasis) -> Result<f64> {
    let got = devectorize(&traj.final_state(), basis)?;
    Ok((got.matrix() - want.matrix()).camax())
}

fn dj_end_to_end() -> Result<Outcome> {
    let inst = dj("balanced:2", 1, 0.1)?;
    let fam = inst.family()?;
    let basis = inst.basis()?;
    let rho0 = inst.initial_state()?;
    let want = inst.final_state_analytic(11.0)?;
    let frames = track_frames(&fam, &s_grid(2001), &TrackOptions::default())?;
    let adiabatic = adiabatic_evolve(&frames, &rho0, 11.0)?;
    let a_err = state_error(&adiabatic, &want, &basis)?;
    let exact = exact_evolve(&fam, &rho0, 11.0, &EvolveOptions::default())?;
    let td = compare_states(&exact.final_state(), &vectorize(&want, &basis)?, &basis)?.trace_distance;
    let p = inst.success_probability_of(&adiabatic.final_state())?;
    let p_exact = inst.success_probability_of(&exact.final_state())?;
    let t_star = optimal_runtime(0.1, 0.9, 1.0)?;
    let pass = a_err < 1e-6 && td < 5e-3 && (p - 0.9).abs() <= 0.005 && (t_star - 11.16).abs() <= 0.01;
    outcome(
        pass,
        format!(
            "adiabatic vs analytic {a_err:.1e}, exact vs analytic trace distance {td:.2e} (< 5e-3), \
             P_success adiabatic {p:.4} / exact {p_exact:.4}, T* {t_star:.3}"
        ),
    )
}

fn theorem_suite() -> Result<Outcome> {
    let grid = uniform_grid(101)?;
    let mut pass = true;
    let mut notes = Vec::new();
    for n in [1, 2] {
        let inst = DjInstance::uniform(FunctionSpec::first_bit(n)?, 0.1)?;
        let r = check_model(&inst.model()?, &grid)?;
        let c = r.commutator_residual.unwrap_or(f64::INFINITY);
        pass &= c < 1e-10 && r.max_drift < 1e-10;
        notes.push(format!("DJ N={n}: commutator {c:.1e}, drift {:.1e}", r.max_drift));
    }
    let inst = DjInstance::uniform(FunctionSpec::first_bit(1)?, 0.1)?;
    let em = check_model(&spontaneous_emission(&inst, 0.05)?, &grid)?;
    pass &= em.all_pass();
    notes.push(format!("emission: {}", if em.all_pass() { "pass" } else { "fail" }));
    let bad = check_model(&with_transverse_dephasing(inst.model()?, 0.3)?, &grid)?;
    let c = bad.commutator_residual.unwrap_or(0.0);
    pass &= c > 1e-3 && bad.max_drift > 1e-3 && !bad.constant_spectrum;
    notes.push(format!("σx perturbation: commutator {c:.2}, drift {:.2}", bad.max_drift));
    let three = check_model(&DjInstance::uniform(FunctionSpec::first_bit(3)?, 0.1)?.model()?, &grid)?;
    notes.push(format!(
        "N=3 (conjecture evidence): drift {:.1e}, {}",
        three.max_drift,
        if three.constant_spectrum { "constant" } else { "drifting" }
    ));
    outcome(pass, notes.join("; "))
}

fn physical(traj: &Trajectory, basis: &OperatorBasis, pure: bool) -> Result<(f64, f64, f64, f64)> {
    let (mut tr, mut herm, mut min_eig, mut purity) = (0.0_f64, 0.0_f64, f64::INFINITY, 0.0_f64);
    for k in 0..traj.len() {
        let m = devectorize(&traj.state(k), basis)?;
        tr = tr.max((m.trace() - C64::new(1.0, 0.0)).norm());
        herm = herm.max(m.hermiticity_error());
        let h = openaqc::OperatorMatrix::new((m.matrix() + m.matrix().adjoint()) * C64::new(0.5, 0.0))?;
        min_eig = min_eig.min(h.hermitian_eigenvalues().into_iter().fold(f64::INFINITY, f64::min));
        if pure {
            purity = purity.max((m.purity() - 1.0).abs());
        }
    }
    Ok((tr, herm, min_eig, purity))
}

fn physicality() -> Result<Outcome> {
    let (mut tr, mut herm, mut min_eig, mut purity) = (0.0_f64, 0.0_f64, f64::INFINITY, 0.0_f64);
    let mut count = 0;
    let opts = EvolveOptions { steps: 2000, record_every: 10 };
    for n in [1, 2] {
        for lambda in [0.0, 0.1, 0.5] {
            for t in [1.0, 11.0, 100.0] {
                let inst = DjInstance::uniform(FunctionSpec::first_bit(n)?, lambda)?;
                let fam = inst.family()?;
                let basis = inst.basis()?;
                let rho0 = inst.initial_state()?;
                let mut trajectories = vec![exact_evolve(&fam, &rho0, t, &opts)?];
                if n == 1 && lambda > 0.0 {
                    let frames = track_frames(&fam, &s_grid(501), &TrackOptions::default())?;
                    trajectories.push(adiabatic_evolve(&frames, &rho0, t)?);
                }
                for traj in &trajectories {
                    let (a, b, c, d) = physical(traj, &basis, lambda == 0.0)?;
                    tr = tr.max(a);
                    herm = herm.max(b);
                    min_eig = min_eig.min(c);
                    purity = purity.max(d);
                    count += 1;
                }
            }
        }
    }
    let pass = tr < 1e-10 && herm < 1e-10 && min_eig > -1e-8 && purity < 1e-8;
    outcome(
        pass,
        format!(
            "{count} trajectories: trace error {tr:.1e}, Hermiticity error {herm:.1e}, min eigenvalue {min_eig:.1e}, purity error (λ=0) {purity:.1e}"
        ),
    )
}

fn n_independence() -> Result<Outcome> {
    let mut notes = Vec::new();
    let mut pass = true;
    for t in [2.0, 5.0] {
        for kind in ["constant", "first-bit"] {
            let mut p = Vec::new();
            for n in 1..=3 {
                let f = if kind == "constant" { FunctionSpec::constant(false, n)? } else { FunctionSpec::first_bit(n)? };
                let inst = DjInstance::uniform(f, 0.0)?;
                let traj = exact_evolve(&inst.family()?, &inst.initial_state()?, t, &EvolveOptions::default())?;
                p.push(inst.success_probability_of(&traj.final_state())?);
            }
            let spread = p.iter().fold(0.0_f64, |a, &x| a.max((x - p[0]).abs()));
            pass &= spread <= 1e-8;
            notes.push(format!("ωT={t} {kind}: P = {:.6} (spread {spread:.1e})", p[0]));
        }
    }
    outcome(pass, notes.join("; "))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Result<Outcome>, Duration);
    let criteria: [Criterion; 8] = [
        ("generator equivalence", generator_equivalence, Duration::from_secs(1)),
        ("LJ spectrum", lj_spectrum, Duration::from_secs(1)),
        ("crossover numbers", crossover_numbers, Duration::from_secs(5)),
        ("crossover curve shape", crossover_curve_shape, Duration::from_secs(60)),
        ("DJ end-to-end", dj_end_to_end, Duration::from_secs(5)),
        ("constant-gap conditions", theorem_suite, Duration::from_secs(30)),
        ("physicality", physicality, Duration::MAX),
        ("closed-system N-independence", n_independence, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = if *budget == Duration::MAX {
            format!("{:.2}s", elapsed.as_secs_f64())
        } else {
            format!("{:.2}s of {}s budget", elapsed.as_secs_f64(), budget.as_secs())
        };
        println!("criterion {} [{name}]: {} ({detail}; {timing})", i + 1, if pass { "PASS" } else { "FAIL" });
        failed += usize::from(!pass);
    }
    if failed == 0 {
        println!("acceptance: all 8 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 8 criteria failed");
        ExitCode::FAILURE
    }
}
