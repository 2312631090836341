//! The `entropy`, `sweep`, `jcoeff` and `functional` commands.

use std::f64::consts::PI;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use fermi_ee::asymptotics::{
    compare_with, fit_points, lattice_prefactor, predicted_prefactor, sweep_rows, SweepRow, SweepSource,
    DEFAULT_J_RESOLUTION,
};
use fermi_ee::functionals::{
    dilog_shifted_bracket, i_functional, i_functional_renyi, i_h_via_dilog, renyi_prefactor,
};
use fermi_ee::geometry::{
    widom_j, widom_j_closed_form, widom_j_density_form, widom_j_face_pair, widom_j_monte_carlo,
    widom_j_quadrature, WidomCoefficient, WidomMethod,
};
use fermi_ee::spectra::{EntropyResult, Provenance, Route};
use fermi_ee::{Domain, RenyiOrder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Mode, RunConfig};
use crate::error::{computation, CliError};
use crate::record::{
    fingerprint_line, read_partial_rows, CrossCheck, DilogLimit, FitBlock, FunctionalEntry, FunctionalReport,
    JBlock, JcoeffReport, ResultRecord,
};

/// Options shared by every command, after command-line overrides.
pub struct Invocation {
    pub cfg: RunConfig,
    pub text: String,
    pub seed: u64,
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub parallel: bool,
    pub self_test: bool,
}

impl Invocation {
    fn record(&self, command: &str) -> ResultRecord {
        ResultRecord::new(command, Some((&self.cfg, &self.text)), self.seed)
    }
}

fn source(cfg: &RunConfig) -> Result<SweepSource, CliError> {
    Ok(match cfg.mode {
        Mode::Lattice => SweepSource::Lattice { k_f: cfg.lattice.k_f },
        _ => {
            let (g, o) = cfg.domains()?;
            SweepSource::Continuum { gamma: g.clone(), omega: o.clone(), pipeline: cfg.pipeline() }
        }
    })
}

/// `J` behind the theory line: four Fermi-point/endpoint pairs on the lattice.
fn theory_j(cfg: &RunConfig) -> Result<WidomCoefficient, CliError> {
    match cfg.mode {
        Mode::Lattice => Ok(WidomCoefficient { value: 4.0, method: WidomMethod::ClosedForm, error_estimate: 0.0 }),
        _ => {
            let (g, o) = cfg.domains()?;
            widom_j(g, o, DEFAULT_J_RESOLUTION).map_err(computation)
        }
    }
}

fn theory_prefactor(cfg: &RunConfig, alpha: RenyiOrder) -> Result<f64, CliError> {
    match cfg.mode {
        Mode::Lattice => Ok(lattice_prefactor(alpha)),
        _ => {
            let (g, o) = cfg.domains()?;
            predicted_prefactor(g, o, alpha).map_err(computation)
        }
    }
}

pub fn entropy(inv: &Invocation) -> Result<ResultRecord, CliError> {
    let grid = inv.cfg.grid_values()?;
    if grid.len() != 1 {
        return Err(CliError::Config(format!(
            "entropy evaluates one scale; [grid] gives {} (use `sweep` for several)",
            grid.len()
        )));
    }
    let src = source(&inv.cfg)?;
    let rows = sweep_rows(&src, &inv.cfg.alphas, &grid, false, &|_| {}).map_err(computation)?;
    let mut rec = inv.record("entropy");
    rec.add_sweep_rows(&rows);
    rec.j = Some(theory_j(&inv.cfg)?.into());
    add_clamp_warnings(&mut rec);
    Ok(rec)
}

fn add_clamp_warnings(rec: &mut ResultRecord) {
    for r in &rec.rows {
        if r.max_violation > 1e-7 {
            rec.warnings.push(format!(
                "L = {}: eigenvalues left [0, 1] by up to {:.2e} before clamping",
                r.l, r.max_violation
            ));
        }
    }
    rec.warnings.dedup();
}

/// Writer for partial sweep rows; one JSON line per finished row.
struct PartialLog {
    file: Mutex<BufWriter<File>>,
    error: Mutex<Option<std::io::Error>>,
}

impl PartialLog {
    fn open(path: &Path, fingerprint: &str, existing: &[SweepRow]) -> Result<Self, CliError> {
        let io = |e: std::io::Error| CliError::Computation(format!("writing {}: {e}", path.display()));
        // Rewrite from what parsed so a torn last line is dropped.
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(w, "{}", fingerprint_line(fingerprint)).map_err(io)?;
        for r in existing {
            writeln!(w, "{}", serde_json::to_string(r).expect("rows serialize")).map_err(io)?;
        }
        w.flush().map_err(io)?;
        let file = OpenOptions::new().append(true).open(path).map_err(io)?;
        Ok(PartialLog { file: Mutex::new(BufWriter::new(file)), error: Mutex::new(None) })
    }

    fn append(&self, row: &SweepRow) {
        let line = serde_json::to_string(row).expect("rows serialize");
        let mut f = self.file.lock().expect("writer lock");
        let r = writeln!(f, "{line}").and_then(|_| f.flush());
        if let Err(e) = r {
            self.error.lock().expect("error lock").get_or_insert(e);
        }
    }
}

/// Identifies a sweep for resumption: everything that changes the numbers.
fn fingerprint(cfg: &RunConfig) -> String {
    let mut c = cfg.clone();
    c.output = Default::default();
    c.fit = Default::default();
    c.budget = Default::default();
    c.seed = 0;
    c.to_toml()
}

fn resume_path(inv: &Invocation) -> Option<PathBuf> {
    if let Some(p) = &inv.cfg.output.resume {
        return Some(PathBuf::from(p));
    }
    inv.json.as_ref().map(|j| {
        let mut s = j.as_os_str().to_owned();
        s.push(".partial.jsonl");
        PathBuf::from(s)
    })
}

pub fn sweep(inv: &Invocation) -> Result<ResultRecord, CliError> {
    let grid = inv.cfg.grid_values()?;
    if grid.is_empty() {
        return Err(CliError::Config("sweep needs a [grid]".into()));
    }
    let mut rec = inv.record("sweep");
    let rows = if inv.self_test {
        rec.self_test = true;
        synthetic_rows(&inv.cfg, &grid)?
    } else {
        measured_rows(inv, &grid, &mut rec)?
    };
    rec.add_sweep_rows(&rows);
    let j = theory_j(&inv.cfg)?;
    rec.j = Some(j.into());

    let d = inv.cfg.dim();
    let window = inv.cfg.fit.window.unwrap_or([grid[0], grid[grid.len() - 1]]);
    for &alpha in &inv.cfg.alphas {
        let points: Vec<(f64, f64)> = rec.rows.iter().filter(|r| r.alpha == alpha).map(|r| (r.l, r.s)).collect();
        let fit = match fit_points(&points, d, window, inv.cfg.fit.weighting) {
            Ok(f) => f,
            Err(e) => {
                rec.warnings.push(format!("alpha = {alpha}: no fit ({e})"));
                continue;
            }
        };
        let cmp = compare_with(&fit, theory_prefactor(&inv.cfg, alpha)?).map_err(computation)?;
        rec.fits.push(FitBlock::new(alpha, &fit, &cmp));
    }
    add_clamp_warnings(&mut rec);
    Ok(rec)
}

fn measured_rows(inv: &Invocation, grid: &[f64], rec: &mut ResultRecord) -> Result<Vec<SweepRow>, CliError> {
    let src = source(&inv.cfg)?;
    let fp = fingerprint(&inv.cfg);
    let partial = resume_path(inv);
    let mut done: Vec<SweepRow> = match &partial {
        Some(p) => read_partial_rows(p, &fp)?,
        None => Vec::new(),
    };
    done.retain(|r| grid.contains(&r.l));
    let todo: Vec<f64> = grid.iter().copied().filter(|l| !done.iter().any(|r| r.l == *l)).collect();
    if !done.is_empty() {
        rec.warnings.push(format!("resumed {} of {} scales from a partial run", done.len(), grid.len()));
    }
    let log = match &partial {
        Some(p) => Some(PartialLog::open(p, &fp, &done)?),
        None => None,
    };
    let on_row = |row: &SweepRow| {
        if let Some(l) = &log {
            l.append(row);
        }
    };
    let fresh = sweep_rows(&src, &inv.cfg.alphas, &todo, inv.parallel, &on_row).map_err(computation)?;
    if let Some(l) = &log {
        if let Some(e) = l.error.lock().expect("error lock").take() {
            return Err(CliError::Computation(format!("writing partial rows: {e}")));
        }
    }
    done.extend(fresh);
    done.sort_by(|a, b| a.l.total_cmp(&b.l));
    if let Some(p) = &partial {
        drop(log);
        fs::remove_file(p).ok();
    }
    Ok(done)
}

/// Rows generated exactly from the theory line `a L^{d-1} ln L + b L^{d-1}`.
fn synthetic_rows(cfg: &RunConfig, grid: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    let p = cfg.dim() as i32 - 1;
    let offset = 0.25;
    let mut prefactors = Vec::with_capacity(cfg.alphas.len());
    for &a in &cfg.alphas {
        prefactors.push(theory_prefactor(cfg, a)?);
    }
    Ok(grid
        .iter()
        .map(|&l| {
            let area = l.powi(p);
            let prov = Provenance {
                gamma: "synthetic".into(),
                omega: "synthetic".into(),
                route: Route::Nystrom,
                rule: "synthetic".into(),
                n: 0,
                clamp_count: 0,
                max_violation: 0.0,
            };
            let entropies = cfg
                .alphas
                .iter()
                .zip(&prefactors)
                .map(|(&alpha, &c)| EntropyResult { alpha, l, s: c * area * l.ln() + offset * area, provenance: prov.clone() })
                .collect();
            SweepRow { l, n: 0, particle_number: 0.0, entropies, wall_time_s: 0.0 }
        })
        .collect())
}

pub fn jcoeff(inv: &Invocation) -> Result<ResultRecord, CliError> {
    if inv.cfg.mode == Mode::Lattice {
        return Err(CliError::Config("jcoeff needs continuum domains, not lattice mode".into()));
    }
    let (g, o) = inv.cfg.domains()?;
    let res = inv.cfg.jcoeff.resolution;
    let mut rng = ChaCha8Rng::seed_from_u64(inv.seed);
    let report = jcoeff_report(g, o, res, inv.cfg.jcoeff.mc_samples, &mut rng)?;
    let mut rec = inv.record("jcoeff");
    rec.j = Some(widom_j(g, o, res).map_err(computation)?.into());
    rec.jcoeff = Some(report);
    Ok(rec)
}

pub fn jcoeff_report(
    g: &Domain,
    o: &Domain,
    resolution: usize,
    mc_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<JcoeffReport, CliError> {
    let mut estimates: Vec<WidomCoefficient> = Vec::new();
    let mut checks = Vec::new();
    let mut density_form = None;
    if g.dim() == 1 {
        let c = widom_j_closed_form(g, o).map_err(computation)?;
        checks.push(CrossCheck::absolute("closed_form_is_integer", c.value, c.value.round(), 0.0));
        estimates.push(c);
        return Ok(JcoeffReport { estimates: estimates.into_iter().map(JBlock::from).collect(), density_form, checks });
    }
    let quad = widom_j_quadrature(g, o, resolution).map_err(computation)?;
    if g.is_polytope() && o.is_polytope() {
        let fp = widom_j_face_pair(g, o).map_err(computation)?;
        checks.push(CrossCheck::relative("quadrature_vs_face_pair", quad.value, fp.value, 1e-6));
        estimates.push(fp);
    }
    if g.is_ball() || o.is_ball() {
        let cf = widom_j_closed_form(g, o).map_err(computation)?;
        checks.push(CrossCheck::relative("quadrature_vs_sphere_formula", quad.value, cf.value, 1e-3));
        if g.is_ball() {
            let df = widom_j_density_form(g, o).map_err(computation)?;
            checks.push(CrossCheck::relative("density_form_vs_sphere_formula", df, cf.value, 1e-12));
            density_form = Some(df);
        }
        estimates.push(cf);
    }
    estimates.push(quad);
    if mc_samples >= 2 {
        let mc = widom_j_monte_carlo(g, o, mc_samples, rng).map_err(computation)?;
        // Five standard errors.
        checks.push(CrossCheck::absolute("monte_carlo_vs_quadrature", mc.value, quad.value, 5.0 * mc.error_estimate));
        estimates.push(mc);
    }
    Ok(JcoeffReport { estimates: estimates.into_iter().map(JBlock::from).collect(), density_form, checks })
}

pub fn functional(inv: &Invocation) -> Result<ResultRecord, CliError> {
    let mut rec = inv.record("functional");
    rec.functional = Some(functional_report(&inv.cfg.functional.alphas, inv.cfg.functional.tol, inv.cfg.functional.dilog_y)?);
    Ok(rec)
}

pub fn functional_report(alphas: &[RenyiOrder], tol: f64, y: f64) -> Result<FunctionalReport, CliError> {
    let mut entries = Vec::new();
    let mut checks = Vec::new();
    for &alpha in alphas {
        let v = i_functional_renyi(alpha, tol).map_err(computation)?;
        let exact = renyi_prefactor(alpha);
        let via_dilog = i_h_via_dilog(alpha).ok();
        checks.push(CrossCheck::absolute(&format!("quadrature_vs_closed_form(alpha={alpha})"), v.value, exact, 1e-8));
        if let Some(x) = via_dilog {
            checks.push(CrossCheck::absolute(&format!("dilog_route_vs_closed_form(alpha={alpha})"), x, exact, 1e-8));
        }
        entries.push(FunctionalEntry {
            alpha,
            numeric: v.value,
            abs_error_estimate: v.abs_error_estimate,
            closed_form: exact,
            abs_dev: (v.value - exact).abs(),
            via_dilog,
        });
    }
    let linear = i_functional(|t| t, tol).map_err(computation)?.value;
    checks.push(CrossCheck::absolute("linear_function_vanishes", linear, 0.0, 1e-14));

    let bracket = dilog_shifted_bracket(y).map_err(computation)?;
    let limit = -PI * PI / 6.0;
    let expected_at_y = limit + (y.ln() + 1.0) / y;
    // The bracket approaches its limit like ln(y)/y, so the pass criterion is
    // the two-term value (next term below (ln y + 1)/y²); the raw distance to
    // the limit is reported alongside.
    let tail = (y.ln() + 1.0) / (y * y) + 1e-12;
    checks.push(CrossCheck::absolute("dilog_bracket_approach", bracket, expected_at_y, tail));
    let dilog_limit = DilogLimit {
        y,
        bracket,
        limit,
        abs_dev: (bracket - limit).abs(),
        expected_at_y,
        abs_dev_expected: (bracket - expected_at_y).abs(),
    };
    Ok(FunctionalReport { tol, entries, linear_value: linear, dilog_limit, checks })
}

/// Fails with exit code 4 when any cross-check in the record failed.
pub fn require_checks(rec: &ResultRecord) -> Result<(), CliError> {
    let mut failed: Vec<&str> = Vec::new();
    if let Some(j) = &rec.jcoeff {
        failed.extend(j.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()));
    }
    if let Some(f) = &rec.functional {
        failed.extend(f.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()));
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("cross-check failed: {}", failed.join(", "))))
    }
}
