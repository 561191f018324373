//! Stage execution and the artifact manifest.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use hmhf_core::blowup::{
    blowup_speed_check, convergence_report, evolve_physical, fit_run, initial_from_profile,
    ProfileNorms,
};
use hmhf_core::evolution::{
    make_initial, measure_decay, tune_t, Evolver, Perturbation, Shape, Trajectory, TuneReport,
};
use hmhf_core::profile::{find_profile, ProfileSolution};
use hmhf_core::radial::{GridSpec, Parity, RadialFunction, RadialGrid};
use hmhf_core::spectrum::{
    assemble_operator, eigenpairs, spectral_gap, verify_translation_mode, SpectrumReport,
};
use hmhf_core::verify::{run_suite, VerifyConfig};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{Command, RunConfig, ShapeName};
use crate::svg::{Plot, Series};

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct StageRecord {
    pub name: &'static str,
    pub status: &'static str,
    pub seconds: f64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub stages: Vec<&'static str>,
    pub seed: u64,
    pub workers: Option<usize>,
    pub config_sha256: String,
    pub config: RunConfig,
    pub records: Vec<StageRecord>,
    pub files: Vec<FileEntry>,
    pub status: &'static str,
    pub failure: Option<String>,
}

impl Manifest {
    pub fn write(&self, out: &Path) -> Result<()> {
        write_json(&out.join("manifest.json"), self)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

struct Pipeline<'a> {
    cfg: &'a RunConfig,
    out: PathBuf,
    grid: Arc<RadialGrid>,
    profile: Option<ProfileSolution>,
    profile_on_disk: bool,
    c0: Option<f64>,
    tuned: Option<(TuneReport, Trajectory)>,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Pipeline<'_> {
    fn path(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn profile(&mut self) -> Result<ProfileSolution> {
        if self.profile_on_disk {
            let p =
                ProfileSolution::read(self.out.join("profile.csv"), self.out.join("profile.json"))?;
            self.inputs
                .extend(["profile.csv".to_string(), "profile.json".to_string()]);
            if **p.grid() != *self.grid {
                bail!("profile.csv was written on a different grid");
            }
            return Ok(p);
        }
        if let Some(p) = &self.profile {
            return Ok(p.clone());
        }
        let p = find_profile(&self.cfg.profile, self.grid.clone())?;
        self.profile = Some(p.clone());
        Ok(p)
    }

    fn perturbation(&mut self, p: &ProfileSolution) -> Result<Perturbation> {
        let s = &self.cfg.perturbation;
        let shape = match s.shape {
            ShapeName::Gaussian => Shape::GaussianBump {
                center: s.center,
                width: s.width,
            },
            ShapeName::Psi1 => Shape::Psi1Like,
            ShapeName::Csv => {
                let path = s
                    .path
                    .as_ref()
                    .ok_or_else(|| anyhow!("perturbation.path missing"))?;
                let f = RadialFunction::read_csv(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                if f.parity() != Parity::Odd {
                    bail!("perturbation samples in {} must be odd", path.display());
                }
                self.inputs.push(path.display().to_string());
                Shape::Samples(f)
            }
        };
        Ok(Perturbation::with_y_norm(
            shape,
            s.amplitude,
            p,
            &self.grid,
        )?)
    }

    fn gap(&mut self, p: &ProfileSolution) -> Result<f64> {
        if let Some(c0) = self.c0 {
            return Ok(c0);
        }
        let pairs = eigenpairs(&assemble_operator(Some(p), self.grid.clone())?, 4)?;
        let c0 = spectral_gap(&pairs).ok_or_else(|| anyhow!("spectral gap unavailable"))?;
        self.c0 = Some(c0);
        Ok(c0)
    }

    fn tuned(&mut self, p: &ProfileSolution) -> Result<(TuneReport, Trajectory)> {
        if let Some(t) = &self.tuned {
            return Ok(t.clone());
        }
        let h = self.perturbation(p)?;
        let (mut rep, traj) = tune_t(
            &h,
            p,
            &self.grid,
            &self.cfg.evolve.evolution(),
            &self.cfg.tune,
        )?;
        rep.c0_reference = Some(self.gap(p)?);
        self.tuned = Some((rep.clone(), traj.clone()));
        Ok((rep, traj))
    }

    fn stage_profile(&mut self) -> Result<()> {
        let p = find_profile(&self.cfg.profile, self.grid.clone())?;
        let (csv, js) = (self.path("profile.csv"), self.path("profile.json"));
        p.write(&csv, &js)?;
        let tail = p.tail_fit();
        let mut pts = Vec::new();
        for (y, f) in p.f.nodes().iter().zip(p.f.values()) {
            pts.push((*y, *f));
        }
        Plot {
            title: "self-similar profile",
            x_label: "y",
            y_label: "f0",
            log_x: false,
            log_y: false,
            series: vec![
                Series {
                    label: "f0(y)",
                    points: pts,
                    dashed: false,
                },
                Series {
                    label: "f_inf",
                    points: vec![(0.0, p.f_infinity), (self.grid.y_max(), p.f_infinity)],
                    dashed: true,
                },
            ],
        }
        .write(&self.path("profile.svg"))?;
        println!(
            "profile: b = {:.15}, f_inf = {:.13}, residual = {:.2e}, tail exponent = {:.4}",
            p.b, p.f_infinity, p.residual, tail.exponent
        );
        self.profile = Some(p);
        self.profile_on_disk = true;
        Ok(())
    }

    fn stage_spectrum(&mut self) -> Result<()> {
        let p = self.profile()?;
        let a = assemble_operator(Some(&p), self.grid.clone())?;
        let pairs = eigenpairs(&a, self.cfg.spectrum.eigenvalues)?;
        let tm = verify_translation_mode(&a, &p, pairs.first());
        let report = SpectrumReport::new(&a, &pairs, Some(&tm));
        self.c0 = report.gap_c0;
        write_json(&self.path("spectrum.json"), &report)?;
        // Eigenvector entries are only accurate where the weight is above roundoff.
        let mmax = a.mass().iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..self.grid.len())
            .filter(|&i| a.mass()[i] >= 1e-20 * mmax)
            .collect();
        let mut text = String::from("y");
        for k in 0..pairs.len() {
            text.push_str(&format!(",phi_{}", k + 1));
        }
        text.push('\n');
        for &i in &keep {
            text.push_str(&format!("{:.17e}", self.grid.nodes()[i]));
            for e in &pairs {
                text.push_str(&format!(",{:.17e}", e.phi.values()[i]));
            }
            text.push('\n');
        }
        std::fs::write(self.path("eigenfunctions.csv"), text)?;
        Plot {
            title: "leading eigenfunctions (rho-normalized)",
            x_label: "y",
            y_label: "phi",
            log_x: false,
            log_y: false,
            series: pairs
                .iter()
                .take(3)
                .zip(["phi_1", "phi_2", "phi_3"])
                .map(|(e, label)| Series {
                    label,
                    points: keep
                        .iter()
                        .filter(|&&i| self.grid.nodes()[i] <= 8.0)
                        .map(|&i| (self.grid.nodes()[i], e.phi.values()[i]))
                        .collect(),
                    dashed: false,
                })
                .collect(),
        }
        .write(&self.path("eigenfunctions.svg"))?;
        println!(
            "spectrum: eigenvalues {:?}, c0 = {}",
            report
                .eigenvalues
                .iter()
                .map(|l| format!("{l:.8}"))
                .collect::<Vec<_>>(),
            report.gap_c0.map_or("n/a".into(), |c| format!("{c:.8}"))
        );
        Ok(())
    }

    fn stage_evolve(&mut self) -> Result<()> {
        let p = self.profile()?;
        let h = self.perturbation(&p)?;
        let e = &self.cfg.evolve;
        let w0 = make_initial(&h, e.t, &p, &self.grid)?;
        let traj = Evolver::new(&p, self.grid.clone(), &e.evolution())?.evolve(w0)?;
        traj.write_csv(self.path("trajectory.csv"))?;
        let decay = measure_decay(&traj, e.window);
        let summary = json!({
            "T": e.t,
            "h_norm_Y": self.cfg.perturbation.amplitude,
            "escape": traj.escape.map(|(s, sign)| json!({"s": s, "sign": sign})),
            "decay": decay.as_ref().ok(),
            "decay_error": decay.as_ref().err().map(|e| e.to_string()),
        });
        write_json(&self.path("evolve.json"), &summary)?;
        decay_plot(&traj, "similarity-time evolution").write(&self.path("decay.svg"))?;
        match (&traj.escape, &decay) {
            (Some((s, sign)), _) => println!("evolve: escaped at s = {s:.3} with sign {sign:+}"),
            (None, Ok(d)) => println!("evolve: decay rate {:.6} on {:?}", d.rate, d.window),
            (None, Err(err)) => println!("evolve: no decay fit ({err})"),
        }
        Ok(())
    }

    fn stage_tune(&mut self) -> Result<()> {
        let p = self.profile()?;
        let (rep, traj) = self.tuned(&p)?;
        write_json(&self.path("tune.json"), &rep)?;
        traj.write_csv(self.path("tuned_trajectory.csv"))?;
        decay_plot(&traj, "tuned trajectory").write(&self.path("tune_decay.svg"))?;
        println!(
            "tune: T_h = {:.12}, omega = {:.6}, c0 = {}",
            rep.t_h,
            rep.omega_fit.rate,
            rep.c0_reference.map_or("n/a".into(), |c| format!("{c:.8}"))
        );
        Ok(())
    }

    fn stage_blowup(&mut self) -> Result<()> {
        let p = self.profile()?;
        let h = self.perturbation(&p)?;
        let b = &self.cfg.blowup;
        let pg = Arc::new(RadialGrid::new(GridSpec::new(
            b.r_max,
            b.resolution,
            b.stretch,
        ))?);
        let run = evolve_physical(initial_from_profile(&p, Some(&h), &pg), p.b, &[], b)?;
        run.write_csv(self.path("blowup_run.csv"))?;
        let fit = fit_run(&run)?;
        let speed = blowup_speed_check(&p)?;
        let (rep, traj) = self.tuned(&p)?;
        let norms = ProfileNorms::of(&p)?;
        let conv = convergence_report(
            &traj,
            rep.t_h,
            rep.omega_fit.rate,
            &norms,
            self.cfg.tune.window,
        )?;
        let mut text = String::from("t,tau,ratio,model\n");
        for x in &conv.points {
            text.push_str(&format!(
                "{:.15e},{:.10e},{:.10e},{:.10e}\n",
                x.t, x.tau, x.ratio, x.model
            ));
        }
        std::fs::write(self.path("convergence.csv"), text)?;
        let summary = json!({
            "status": run.status,
            "final_time": run.t,
            "final_gradient": run.gradient_at_origin(),
            "refinements": run.history.last().map_or(0, |h| h.refinements),
            "fit": fit,
            "T_h": rep.t_h,
            "T_est_minus_T_h": fit.t_est - rep.t_h,
            "speed": speed,
            "convergence": {
                "omega_fit": conv.omega_fit,
                "slope": conv.slope,
                "decreasing": conv.decreasing,
            },
        });
        write_json(&self.path("blowup.json"), &summary)?;
        let grad: Vec<(f64, f64)> = run
            .history
            .iter()
            .filter(|x| x.t < fit.t_est)
            .map(|x| (fit.t_est - x.t, x.gradient))
            .collect();
        let model: Vec<(f64, f64)> = grad
            .iter()
            .map(|(tau, _)| (*tau, fit.prefactor / tau.sqrt()))
            .collect();
        Plot {
            title: "gradient at the origin",
            x_label: "T_est - t",
            y_label: "du/dr(0,t)",
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    label: "run",
                    points: grad,
                    dashed: false,
                },
                Series {
                    label: "C (T-t)^(-1/2)",
                    points: model,
                    dashed: true,
                },
            ],
        }
        .write(&self.path("blowup_rate.svg"))?;
        let c0 = rep.c0_reference.unwrap_or(rep.omega_fit.rate);
        let first = conv.points.first().map_or(1.0, |x| x.ratio);
        Plot {
            title: "relative Y distance to the self-similar solution",
            x_label: "T_h - t",
            y_label: "ratio",
            log_x: true,
            log_y: true,
            series: vec![
                Series {
                    label: "ratio",
                    points: conv.points.iter().map(|x| (x.tau, x.ratio)).collect(),
                    dashed: false,
                },
                Series {
                    label: "(T_h - t)^c0",
                    points: conv
                        .points
                        .iter()
                        .map(|x| (x.tau, first * x.tau.powf(c0)))
                        .collect(),
                    dashed: true,
                },
            ],
        }
        .write(&self.path("convergence.svg"))?;
        println!(
            "blowup: status {:?}, T_est = {:.10}, T_h = {:.10}, speed exponent = {:.4}",
            run.status, fit.t_est, rep.t_h, speed.late.exponent
        );
        Ok(())
    }

    fn stage_verify(&mut self) -> Result<()> {
        let vc = VerifyConfig {
            seed: self.cfg.seed,
            y_max: self.cfg.y_max,
            resolution: self.cfg.resolution,
            stretch: self.cfg.stretch,
        };
        let p = self.profile()?;
        p.write(self.path("profile.csv"), self.path("profile.json"))?;
        let report = run_suite(&vc, Some(&p))?;
        write_json(&self.path("verify.json"), &report)?;
        for c in &report.checks {
            println!(
                "{} {:<44} {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        let failed = report.failures().count();
        if failed > 0 {
            bail!("{failed} of {} checks failed", report.checks.len());
        }
        Ok(())
    }
}

fn decay_plot<'a>(traj: &Trajectory, title: &'a str) -> Plot<'a> {
    Plot {
        title,
        x_label: "s",
        y_label: "norm",
        log_x: false,
        log_y: true,
        series: vec![
            Series {
                label: "||w||_rho",
                points: traj.samples.iter().map(|x| (x.s, x.norm_rho)).collect(),
                dashed: false,
            },
            Series {
                label: "|a(s)|",
                points: traj.samples.iter().map(|x| (x.s, x.a.abs())).collect(),
                dashed: true,
            },
        ],
    }
}

/// Runs the configured stages, writing artifacts and the manifest to the
/// output directory. The manifest is written even when a stage fails.
pub fn run(cfg: &RunConfig, config_text: &str, workers: Option<usize>) -> Result<Manifest> {
    let command = cfg.command.ok_or_else(|| anyhow!("no command given"))?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut pl = Pipeline {
        cfg,
        out: out.clone(),
        grid: Arc::new(RadialGrid::new(cfg.grid_spec())?),
        profile: None,
        profile_on_disk: false,
        c0: None,
        tuned: None,
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    let mut records = Vec::new();
    let mut failure = None;
    for &stage in command.stages() {
        let start = Instant::now();
        let res = match stage {
            Command::Profile => pl.stage_profile(),
            Command::Spectrum => pl.stage_spectrum(),
            Command::Evolve => pl.stage_evolve(),
            Command::Tune => pl.stage_tune(),
            Command::Blowup => pl.stage_blowup(),
            Command::Verify => pl.stage_verify(),
            Command::All => unreachable!("expanded above"),
        };
        let error = res.as_ref().err().map(|e| format!("{e:#}"));
        records.push(StageRecord {
            name: stage.name(),
            status: if error.is_some() { "failed" } else { "ok" },
            seconds: start.elapsed().as_secs_f64(),
            inputs: std::mem::take(&mut pl.inputs),
            outputs: std::mem::take(&mut pl.outputs),
            error: error.clone(),
        });
        if let Some(e) = error {
            failure = Some(format!("{}: {e}", stage.name()));
            break;
        }
    }
    let mut files = Vec::new();
    for r in &records {
        for name in &r.outputs {
            let path = out.join(name);
            if let Ok(bytes) = std::fs::read(&path) {
                files.push(FileEntry {
                    path: name.clone(),
                    sha256: sha256_hex(&bytes),
                    bytes: bytes.len() as u64,
                });
            }
        }
    }
    let manifest = Manifest {
        tool: "hmhf",
        version: env!("CARGO_PKG_VERSION"),
        command: command.name(),
        stages: command.stages().iter().map(|s| s.name()).collect(),
        seed: cfg.seed,
        workers,
        config_sha256: sha256_hex(config_text.as_bytes()),
        config: cfg.clone(),
        records,
        files,
        status: if failure.is_some() { "failed" } else { "ok" },
        failure,
    };
    manifest.write(&out)?;
    Ok(manifest)
}
