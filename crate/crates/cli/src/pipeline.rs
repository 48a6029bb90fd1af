//! Stages, their on-disk cache and the reports they write.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dyadic_tents::audits::{
    carleson_balls, carleson_boxes, nt_convergence_audit, random_leaves, tent_adr_audit, BoxMembership,
};
use dyadic_tents::bmo::{
    indicator, log_distance, random_leaf_values, random_martingale, staircase, theorem12_split, BoundaryFunction,
    Theorem12Split,
};
use dyadic_tents::dyadic::{build_dyadic_system, DyadicSystem};
use dyadic_tents::extension::{build_extension, comparable_pairs, ExtensionField, FieldFlag, Mollified, MollifierSpec};
use dyadic_tents::geometry::{make_instance, Point};
use dyadic_tents::harmonic::{
    max_principle_audit, run_walks, trace_probe, write_estimates_csv, WosParams,
};
use dyadic_tents::regions::{calibrate, Calibration, RegionParams, Regions, TentAssembly};
use dyadic_tents::whitney::{decompose, WhitneyDecomposition, WhitneyParams};
use dyadic_tents::CubeId;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, FunctionSpec};
use crate::report::{write_report, Check};
use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Grid,
    Whitney,
    Tents,
    Garnett,
    Extend,
    Carleson,
    Nt,
    Wos,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Grid => "grid",
            Stage::Whitney => "whitney",
            Stage::Tents => "tents",
            Stage::Garnett => "garnett",
            Stage::Extend => "extend",
            Stage::Carleson => "carleson-audit",
            Stage::Nt => "nt-audit",
            Stage::Wos => "wos",
        }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io(path, e))
}

#[derive(Serialize, Deserialize)]
struct TentsArtifact {
    params: RegionParams,
    calibration: Option<Calibration>,
    assembly: TentAssembly,
}

pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    cache: PathBuf,
    pub config_hash: String,
    system: DyadicSystem<f64>,
    root: CubeId,
    f: BoundaryFunction<f64>,
    data_hash: String,
    /// `(stage, check)` for every check run so far.
    pub checks: Vec<(String, Check)>,
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig) -> Result<Self, Failure> {
        cfg.validate().map_err(Failure::Validation)?;
        let set = make_instance::<f64>(&cfg.instance)?;
        let system = build_dyadic_system(&set, cfg.depth())?;
        let root = match &cfg.root {
            Some(label) => system.parse(label)?,
            None => system.root(),
        };
        let (f, data_hash) = boundary_function(&system, &cfg.function)?;
        let mut hashed = cfg.clone();
        hashed.out = PathBuf::new();
        let config_hash = sha256_hex(&serde_json::to_vec(&(&hashed, &data_hash)).expect("config serializes"));
        let out = cfg.out.clone();
        let cache = out.join("cache");
        std::fs::create_dir_all(&cache).map_err(|e| io(&cache, e))?;
        Ok(Pipeline { cfg, out, cache, config_hash, system, root, f, data_hash, checks: Vec::new() })
    }

    /// Hash of the configuration prefix a stage depends on.
    fn key(&self, stage: Stage) -> String {
        let c = &self.cfg;
        let instance = json!({ "schema": c.schema, "instance": c.instance, "depth": c.depth() });
        let function = json!({ "root": c.root, "function": c.function, "data": self.data_hash });
        let prefix = match stage {
            Stage::Grid | Stage::Whitney => json!([instance]),
            Stage::Tents => json!([instance, c.regions, c.root, c.seed]),
            Stage::Garnett => json!([instance, function]),
            Stage::Extend => json!([instance, c.regions, c.seed, function]),
            Stage::Carleson | Stage::Nt => json!([instance, c.regions, c.seed, function, c.audits]),
            Stage::Wos => json!([instance, function, c.wos, c.seed]),
        };
        sha256_hex(prefix.to_string().as_bytes())[..16].to_string()
    }

    fn cache_path(&self, stage: Stage) -> PathBuf {
        self.cache.join(format!("{}-{}.json", stage.name(), self.key(stage)))
    }

    fn store<T: Serialize>(&self, stage: Stage, value: &T) -> Result<(), Failure> {
        let path = self.cache_path(stage);
        let w = create(&path)?;
        serde_json::to_writer(w, value).map_err(|e| io(&path, e))
    }

    fn load<T: DeserializeOwned>(&self, stage: Stage, wanted_by: Stage) -> Result<T, Failure> {
        let path = self.cache_path(stage);
        let file = File::open(&path).map_err(|_| {
            Failure::MissingCache(format!("`{}` needs the `{}` stage for this configuration; run it first", wanted_by.name(), stage.name()))
        })?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| io(&path, e))
    }

    fn require(&self, stage: Stage, wanted_by: Stage) -> Result<(), Failure> {
        if self.cache_path(stage).exists() {
            Ok(())
        } else {
            Err(Failure::MissingCache(format!("`{}` needs the `{}` stage for this configuration; run it first", wanted_by.name(), stage.name())))
        }
    }

    fn report<D: Serialize>(&mut self, stage: Stage, checks: Vec<Check>, data: D) -> Result<(), Failure> {
        write_report(&self.out, stage.name(), &self.config_hash, &checks, data)?;
        self.checks.extend(checks.into_iter().map(|c| (stage.name().to_string(), c)));
        Ok(())
    }

    pub fn run(&mut self, stage: Stage) -> Result<(), Failure> {
        match stage {
            Stage::Grid => self.grid(),
            Stage::Whitney => self.whitney(),
            Stage::Tents => self.tents(),
            Stage::Garnett => self.garnett(),
            Stage::Extend => self.extend(None),
            Stage::Carleson => self.carleson(),
            Stage::Nt => self.nt(),
            Stage::Wos => self.wos(),
        }
    }

    pub fn run_all(&mut self) -> Result<(), Failure> {
        let mut stages = vec![Stage::Grid, Stage::Whitney, Stage::Tents, Stage::Garnett, Stage::Extend];
        let a = &self.cfg.audits;
        if a.carleson || a.sum_difference || a.tent_adr {
            stages.push(Stage::Carleson);
        }
        if a.nt {
            stages.push(Stage::Nt);
        }
        if self.cfg.wos.enabled {
            stages.push(Stage::Wos);
        }
        for s in stages {
            self.run(s)?;
        }
        let summary: Vec<_> = self.checks.iter().map(|(s, c)| json!({ "stage": s, "check": c })).collect();
        let checks: Vec<Check> = self.checks.iter().map(|(_, c)| c.clone()).collect();
        write_report(&self.out, "report", &self.config_hash, &checks, json!({ "stages": summary }))
    }

    fn grid(&mut self) -> Result<(), Failure> {
        let s = &self.system;
        let exact = s.exactness_audit();
        let sandwich = s.ball_sandwich();
        let rhos: Vec<f64> = (1..=5).map(|k| 2f64.powi(-k)).collect();
        let thin = s.thin_boundary_fit(&rhos);
        let path = self.out.join("generations.csv");
        let mut w = create(&path)?;
        writeln!(w, "generation,count,side,measure").map_err(|e| io(&path, e))?;
        for k in 0..=s.depth {
            writeln!(w, "{k},{},{},{}", s.set.count(k), s.set.side(k), s.set.measure(k)).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        let checks = vec![
            Check::holds("exactness", exact.holds()),
            Check::at_most("sandwich-inner-spread", sandwich.inner_spread, 2.0),
            Check::at_most("sandwich-outer-spread", sandwich.outer_spread, 2.0),
            Check::holds("thin-boundary-gamma-positive", thin.gamma > 0.0),
        ];
        let data = json!({
            "instance": s.set.kind.name(),
            "depth": s.depth,
            "branching": s.branching(),
            "exactness": exact,
            "sandwich": sandwich,
            "thin_boundary": thin,
            "thin_boundary_vacuous": thin.vacuous(),
        });
        self.store(Stage::Grid, &data)?;
        self.report(Stage::Grid, checks, data)
    }

    fn whitney(&mut self) -> Result<(), Failure> {
        let set = &self.system.set;
        let w = decompose(set, &set.domain, &WhitneyParams::default())?;
        let audit = w.audit(set);
        let path = self.out.join("whitney.csv");
        let mut out = create(&path)?;
        w.write_csv(&mut out, None).map_err(|e| io(&path, e))?;
        out.flush().map_err(|e| io(&path, e))?;
        let checks = vec![
            Check::at_most("volume-defect", audit.volume_defect, 1e-12),
            Check::at_most("scale-rule-violations", audit.scale_rule_violations as f64, 0.0),
            Check::at_most("neighbor-ratio-violations", audit.neighbor_ratio_violations as f64, 0.0),
        ];
        self.store(Stage::Whitney, &w)?;
        let data = json!({ "audit": audit, "min_side": w.min_side(), "max_side": w.max_side(), "unresolved_cells": w.unresolved_cells });
        self.report(Stage::Whitney, checks, data)
    }

    fn params(&self, w: &WhitneyDecomposition<f64>) -> Result<(RegionParams, Option<Calibration>), Failure> {
        let r = &self.cfg.regions;
        match (r.eta, r.k) {
            (Some(eta), Some(k)) => Ok((RegionParams::new(eta, k)?, None)),
            _ => {
                let leaves = random_leaves(&self.system, &self.root, r.calibration_leaves, self.cfg.seed);
                let cal = calibrate(&self.system, w, r.aperture, &leaves, r.calibration_grid)?;
                Ok((cal.params, Some(cal)))
            }
        }
    }

    fn tents(&mut self) -> Result<(), Failure> {
        let w: WhitneyDecomposition<f64> = self.load(Stage::Whitney, Stage::Tents)?;
        let (params, calibration) = self.params(&w)?;
        let regions = Regions::new(&self.system, &w, params);
        let assembly = regions.assign_restricted_owners(&self.root)?;
        let owners: Vec<String> = assembly.owners.iter().map(|o| o.map_or(String::new(), |q| self.system.label(&q))).collect();
        let path = self.out.join("tents.csv");
        let mut out = create(&path)?;
        w.write_csv(&mut out, Some(&owners)).map_err(|e| io(&path, e))?;
        out.flush().map_err(|e| io(&path, e))?;
        let mut per_gen = vec![0usize; self.system.depth as usize + 1];
        for q in assembly.owners.iter().flatten() {
            per_gen[q.gen as usize] += 1;
        }
        let checks = vec![Check::holds("collections-nonempty", regions.collections_nonempty())];
        let data = json!({
            "params": params,
            "lower": params.lower(),
            "upper": params.upper(),
            "calibration": calibration,
            "root": self.system.label(&self.root),
            "owned": assembly.owned_count(),
            "cubes": w.len(),
            "owned_per_generation": per_gen,
        });
        self.store(Stage::Tents, &TentsArtifact { params, calibration, assembly })?;
        self.report(Stage::Tents, checks, data)
    }

    fn split(&self) -> Result<Theorem12Split<f64>, Failure> {
        Ok(theorem12_split(&self.system, &self.f, &self.root)?)
    }

    fn garnett(&mut self) -> Result<(), Failure> {
        let split = self.split()?;
        let d = &split.decomposition;
        let path = self.out.join("garnett.csv");
        let mut out = create(&path)?;
        writeln!(out, "cube,level,parent,average,alpha").map_err(|e| io(&path, e))?;
        for c in &d.cubes {
            let parent = c.parent.map_or(String::new(), |p| self.system.label(&d.cubes[p].id));
            writeln!(out, "{},{},{},{:e},{:e}", self.system.label(&c.id), c.level, parent, c.average, c.alpha).map_err(|e| io(&path, e))?;
        }
        out.flush().map_err(|e| io(&path, e))?;
        let path = self.out.join("remainder.csv");
        let mut out = create(&path)?;
        split.remainder.write_csv(&mut out).map_err(|e| io(&path, e))?;
        out.flush().map_err(|e| io(&path, e))?;
        let recon = d.reconstruction_error(&self.f);
        let norm = split.bmo_f;
        let checks = vec![
            Check::at_most("reconstruction", recon, 1e-12),
            Check::at_most("packing", split.packing, 2.0 + 1e-12),
            Check::at_most("remainder-sup-over-bmo", if norm > 0.0 { split.remainder_sup / norm } else { 0.0 }, 2.0 + 1e-12),
            Check::holds("f0-triangle", split.triangle_holds()),
        ];
        let data = json!({
            "root": self.system.label(&self.root),
            "bmo": norm,
            "threshold": d.threshold,
            "stopping_cubes": d.len(),
            "levels": d.levels(),
            "packing": split.packing,
            "sup_alpha": split.sup_alpha,
            "remainder_sup": split.remainder_sup,
            "bmo_f0": split.bmo_f0,
            "reconstruction_error": recon,
            "support_outside_root": d.support_outside_root,
        });
        self.store(Stage::Garnett, &data)?;
        self.report(Stage::Garnett, checks, data)
    }

    fn upstream(&self, wanted_by: Stage) -> Result<(WhitneyDecomposition<f64>, TentsArtifact, Theorem12Split<f64>), Failure> {
        let tents: TentsArtifact = self.load(Stage::Tents, wanted_by)?;
        self.require(Stage::Garnett, wanted_by)?;
        let w: WhitneyDecomposition<f64> = self.load(Stage::Whitney, wanted_by)?;
        Ok((w, tents, self.split()?))
    }

    /// Builds `F0`; with `query`, evaluates it at the points of that file instead of
    /// running the stage.
    pub fn extend(&mut self, query: Option<&Path>) -> Result<(), Failure> {
        let (w, tents, split) = self.upstream(Stage::Extend)?;
        let field = build_extension(&self.system, &split.dyadic, &tents.assembly)?;
        if let Some(q) = query {
            return self.serve_queries(&w, &field, q);
        }
        let faces = w.faces();
        let jm = field.jump_measure(&faces, w.dim, false);
        let path = self.out.join("jumps.csv");
        let mut out = create(&path)?;
        jm.write_csv(&mut out).map_err(|e| io(&path, e))?;
        out.flush().map_err(|e| io(&path, e))?;
        let f0_sup = field.cube_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut checks = Vec::new();
        let mut data = json!({
            "f0_sup": f0_sup,
            "f0_zero": f0_sup == 0.0,
            "stopping_cubes": field.stopping.len(),
            "tent_overlap": field.tent_overlap(),
            "jump_faces": jm.len(),
            "jump_total": jm.total,
        });
        let a = self.cfg.audits.clone();
        if a.tv || a.gradient {
            let m = Mollified::new(&field, &w, &self.system, MollifierSpec::default())?;
            if a.tv && !jm.is_empty() {
                let diam = self.system.set.diam;
                let boxes = m.random_regions(a.tv_boxes, diam / 20.0, diam / 2.0, self.cfg.seed, Some(&jm));
                let tv = m.tv_audit(&jm, &boxes, &a.tv_thetas)?;
                checks.push(Check::at_most("tv-relative-error", tv.max_relative_error, a.tv_tolerance));
                data["tv"] = json!(tv);
            }
            if a.gradient {
                let g = m.gradient_audit(a.gradient_samples, split.bmo_f, self.cfg.seed);
                checks.push(Check::at_most("gradient-sup", g.sup, a.gradient_max));
                data["gradient"] = json!(g);
            }
        }
        self.store(Stage::Extend, &data)?;
        self.report(Stage::Extend, checks, data)
    }

    fn serve_queries(&self, w: &WhitneyDecomposition<f64>, field: &ExtensionField<f64>, path: &Path) -> Result<(), Failure> {
        let input = File::open(path).map_err(|e| io(path, e))?;
        let m = Mollified::new(field, w, &self.system, MollifierSpec::default())?;
        let stdout = std::io::stdout();
        let mut out = stdout.lock();
        let dim = w.dim;
        writeln!(out, "x,y,z,f0,flag,f,gx,gy,gz").map_err(|e| io(path, e))?;
        for (n, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(|e| io(path, e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let coords: Vec<f64> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Failure::Validation(format!("{}: line {}: bad coordinates", path.display(), n + 1)))?;
            if coords.len() != dim {
                return Err(Failure::Validation(format!("{}: line {}: expected {dim} coordinates", path.display(), n + 1)));
            }
            let mut p = Point::origin();
            p.0[..dim].copy_from_slice(&coords);
            let (v, flag) = field.evaluate_f0(w, &p);
            let flag = match flag {
                FieldFlag::Owned => "owned",
                FieldFlag::Unowned => "unowned",
                FieldFlag::Unresolved => "unresolved",
                FieldFlag::Outside => "outside",
            };
            let (fv, g) = match (m.value(&p), m.gradient(&p)) {
                (Ok(fv), Ok(g)) => (fv.to_string(), g.map(|x| x.to_string())),
                _ => (String::new(), [String::new(), String::new(), String::new()]),
            };
            writeln!(out, "{},{},{},{v},{flag},{fv},{},{},{}", p.0[0], p.0[1], p.0[2], g[0], g[1], g[2]).map_err(|e| io(path, e))?;
            out.flush().map_err(|e| io(path, e))?;
        }
        Ok(())
    }

    fn carleson(&mut self) -> Result<(), Failure> {
        self.require(Stage::Extend, Stage::Carleson)?;
        let (w, tents, split) = self.upstream(Stage::Carleson)?;
        let field = build_extension(&self.system, &split.dyadic, &tents.assembly)?;
        let regions = Regions::new(&self.system, &w, tents.params);
        let faces = w.faces();
        let a = self.cfg.audits.clone();
        let (c0, norm) = (split.packing, split.bmo_f);
        let mut checks = Vec::new();
        let mut data = json!({ "c0": c0, "bmo": norm });
        if a.carleson {
            let jm = field.jump_measure(&faces, w.dim, false);
            let jt = field.jump_measure(&faces, w.dim, true);
            let mut membership = BoxMembership::new(&regions);
            let boxes = carleson_boxes(&mut membership, &jt, &self.root, a.margin, c0, norm)?;
            let set = &self.system.set;
            let radii = (set.side(self.system.depth), 2.0 * set.diam);
            let balls = carleson_balls(&self.system, &jm, None, &w.root.closure(), &self.root, a.balls, radii, self.cfg.seed, c0, norm)?;
            checks.push(Check::at_most("carleson-normalized", boxes.normalized, a.carleson_max));
            if boxes.max > 0.0 {
                checks.push(Check::at_most("ball-box-ratio", balls.max / boxes.max, a.consistency_max));
            }
            let path = self.out.join("carleson_boxes.csv");
            let mut out = create(&path)?;
            writeln!(out, "cube,mass,scale,value").map_err(|e| io(&path, e))?;
            for t in &boxes.tests {
                writeln!(out, "{},{},{},{}", t.label, t.mass, t.scale, t.value).map_err(|e| io(&path, e))?;
            }
            out.flush().map_err(|e| io(&path, e))?;
            let summary = |r: &dyadic_tents::audits::CarlesonReport| {
                json!({ "family": r.family, "family_size": r.family_size, "max": r.max, "argmax": r.argmax,
                        "normalized": r.normalized, "truncation_delta": r.truncation_delta })
            };
            data["boxes"] = summary(&boxes);
            data["balls"] = summary(&balls);
        }
        if a.sum_difference {
            let pairs = comparable_pairs(&self.system, &self.root, 2, a.kappa);
            let sd = field.sum_difference_audit(&self.system, &pairs, a.kappa, c0.max(1.0), norm);
            checks.push(Check::at_most("sum-difference-normalized", sd.normalized, a.carleson_max));
            data["sum_difference"] = json!(sd);
        }
        if a.tent_adr {
            let g = self.system.depth;
            let b = self.system.branching();
            let top = self.root.gen;
            let cubes: Vec<CubeId> = random_leaves(&self.system, &self.root, a.tent_adr_cubes, self.cfg.seed)
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.ancestor(b, top + (i as u32 % (g - top).max(1))))
                .collect();
            let adr = tent_adr_audit(&regions, &tents.assembly, &faces, &cubes, 20, self.cfg.seed)?;
            checks.push(Check::at_most("tent-adr-max", adr.max_ratio, a.carleson_max));
            data["tent_adr"] = json!({ "max_ratio": adr.max_ratio, "max_large": adr.max_large, "max_small": adr.max_small,
                                       "max_middle": adr.max_middle, "max_total_area": adr.max_total_area });
        }
        self.report(Stage::Carleson, checks, data)
    }

    fn nt(&mut self) -> Result<(), Failure> {
        self.require(Stage::Extend, Stage::Nt)?;
        let (w, tents, split) = self.upstream(Stage::Nt)?;
        let field = build_extension(&self.system, &split.dyadic, &tents.assembly)?;
        let regions = Regions::new(&self.system, &w, tents.params);
        let a = &self.cfg.audits;
        let leaves = random_leaves(&self.system, &self.root, a.nt_points, self.cfg.seed);
        let f0 = split.decomposition.f0();
        let report = nt_convergence_audit(&regions, &field, 0.0, &f0, &leaves, a.nt_tolerance);
        let checks = vec![Check::at_least("nt-converged-fraction", report.fraction, a.nt_min_fraction)];
        self.report(Stage::Nt, checks, report)
    }

    fn wos(&mut self) -> Result<(), Failure> {
        self.require(Stage::Grid, Stage::Wos)?;
        let s = &self.system;
        let cfg = &self.cfg.wos;
        let mut params = WosParams::for_system(s, cfg.walks, self.cfg.seed);
        if let Some(e) = cfg.eps_stop {
            params.eps_stop = e;
        }
        let points: Vec<Point<f64>> = if cfg.points.is_empty() {
            let mid = CubeId::new(s.depth, s.set.count(s.depth) / 2);
            let x = s.leaf_point(&mid);
            let nu = s.set.probe_normal();
            [0.05, 0.1, 0.2, 0.4]
                .iter()
                .map(|h| {
                    let mut p = x;
                    for k in 0..3 {
                        p.0[k] += h * s.set.diam * nu.0[k];
                    }
                    p
                })
                .collect()
        } else {
            cfg.points.iter().map(|c| { let mut p = Point::origin(); p.0[..c.len()].copy_from_slice(c); p }).collect()
        };
        let mut estimates = Vec::new();
        for p in &points {
            estimates.push(run_walks(s, p, &params)?.estimate(&self.f)?);
        }
        let (lo, hi) = self.f.min_max();
        let mp = max_principle_audit(&estimates, &self.f);
        let in_range = estimates.iter().all(|e| e.estimate >= lo - 1e-12 && e.estimate <= hi + 1e-12);
        let mut checks = vec![Check::holds("max-principle", mp.holds()), Check::holds("score-range", in_range)];
        let path = self.out.join("wos.csv");
        let mut out = create(&path)?;
        write_estimates_csv(&estimates, &mut out).map_err(|e| io(&path, e))?;
        out.flush().map_err(|e| io(&path, e))?;
        let mut data = json!({ "estimates": estimates, "max_principle": mp, "eps_stop": params.eps_stop });
        if let Some(label) = &cfg.trace_leaf {
            let leaf = s.parse(label)?;
            let table = trace_probe(s, &self.f, &leaf, &cfg.trace_heights, &params)?;
            checks.push(Check::holds("trace-monotone-trend", table.monotone_trend));
            data["trace"] = json!(table);
        }
        self.report(Stage::Wos, checks, data)
    }
}

fn boundary_function(system: &DyadicSystem<f64>, spec: &FunctionSpec) -> Result<(BoundaryFunction<f64>, String), Failure> {
    let f = match spec {
        FunctionSpec::Constant { value } => BoundaryFunction::constant(system, *value),
        FunctionSpec::Indicator { cube } => indicator(system, &system.parse(cube)?),
        FunctionSpec::Staircase { rightmost } => staircase(system, *rightmost),
        FunctionSpec::Martingale { levels, seed } => random_martingale(system, *levels, *seed),
        FunctionSpec::LogDistance { point, floor } => {
            let mut p = Point::origin();
            p.0[..point.len()].copy_from_slice(point);
            log_distance(system, &p, *floor)
        }
        FunctionSpec::Random { seed } => random_leaf_values(system, *seed),
        FunctionSpec::Csv { path } => {
            let bytes = std::fs::read(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))?;
            let f = BoundaryFunction::read_csv(system, &bytes[..])?;
            return Ok((f, sha256_hex(&bytes)));
        }
    };
    Ok((f, String::new()))
}
