//! `gen-data`, `eval`, `geometry`, `lowerbound` and `lemma-lab`.

use gauss_mlc::geometry::{normalize, project_orthogonal, sample_unit_vector};
use gauss_mlc::lemma_lab::{
    check_table, correlation_bound_check, correlation_event_family, disagreement_mass, localization_angle_sweep,
    lowerbound_table, perceptron_lowerbound_experiment, pgd_inequality_check, random_blowup_instance,
    random_pgd_instance, weight_blowup_check,
};
use gauss_mlc::metrics::{decomposition_check, err, err_ij};
use gauss_mlc::model::Model;
use gauss_mlc::regularity::{random_mlc_regularity, random_unit_mlc, regularity_report};
use gauss_mlc::report::{plot_data, Cell, CsvTable};
use gauss_mlc::{Classifier, Dataset, GaussRng, Label, MlcWeights, Seed, UnitVector};
use serde_json::{json, Value};

use crate::args::{EvalArgs, GenDataArgs, GeometryArgs, Global, LemmaLabArgs, LowerboundArgs};
use crate::output::Output;
use crate::spec::{self, load_model, stream, EvalSpec, GenDataSpec, GeometrySpec, LemmaLabSpec, LowerboundSpec};
use crate::Failure;

fn to_value<T: serde::Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::Runtime(e.into()))
}

fn master_json(master: Seed) -> Value {
    json!({ "master": master.value() })
}

pub fn gen_data(global: &Global, a: &GenDataArgs) -> Result<(), Failure> {
    let mut s: GenDataSpec = spec::load(global.config.as_deref())?;
    s.source.apply(&a.source)?;
    s.n = a.n.unwrap_or(s.n);
    s.seed = global.seed.unwrap_or(s.seed);
    let master = Seed(s.seed);
    let mut source = s.source.build(master, stream::SOURCE)?;
    let mut out = Output::create(&global.out_dir)?;

    let (data, clean) = source.draw_with_clean(s.n);
    data.save(&out.path("data.txt"))?;
    let flipped = data.iter().zip(&clean).filter(|((_, y), c)| y != *c).count();
    let mut counts = CsvTable::new(["label", "count", "clean_count"]);
    for c in 1..=data.k() {
        let label = Label::new(c, data.k())?;
        let n = data.iter().filter(|(_, y)| *y == label).count();
        let nc = clean.iter().filter(|y| **y == label).count();
        counts.push(vec![c.into(), n.into(), nc.into()]);
    }
    out.csv("label_counts.csv", &counts)?;
    if let Some(w) = source.ground_truth().as_mlc() {
        Model::Mlc(w.clone()).save(&out.path("truth.json"))?;
    }
    let calibration = source.channel().calibration().map(|c| {
        json!({ "band_mass": c.band_mass, "flip_probability": c.flip_probability, "samples": c.samples, "seed": c.seed })
    });
    let results = json!({
        "n": data.len(),
        "k": data.k(),
        "d": data.d(),
        "flipped": flipped,
        "flip_rate": flipped as f64 / data.len().max(1) as f64,
    });
    let seeds = json!({
        "master": master.value(),
        "truth": master.derive(stream::TRUTH).value(),
        "source": master.derive(stream::SOURCE).value(),
    });
    out.finish("gen-data", to_value(&s)?, seeds, json!({ "calibration": calibration }), results)?;
    Ok(())
}

pub fn eval(global: &Global, a: &EvalArgs) -> Result<(), Failure> {
    let mut s: EvalSpec = spec::load(global.config.as_deref())?;
    s.source.apply(&a.source)?;
    if a.model.is_some() {
        s.model = a.model.clone();
    }
    if a.data.is_some() {
        s.data = a.data.clone();
    }
    s.n = a.n.unwrap_or(s.n);
    s.seed = global.seed.unwrap_or(s.seed);
    let master = Seed(s.seed);
    let path = s.model.clone().ok_or_else(|| Failure::Invalid("eval needs --model".into()))?;
    let model = load_model(&path)?;
    let (data, clean) = match &s.data {
        Some(p) => (Dataset::load(p).map_err(Failure::invalid)?, None),
        None => {
            if s.n == 0 {
                return Err(Failure::Invalid("n must be at least 1".into()));
            }
            let (d, c) = s.source.build(master, stream::EVAL)?.draw_with_clean(s.n);
            (d, Some(c))
        }
    };
    if (model.k(), model.d()) != (data.k(), data.d()) {
        return Err(Failure::invalid(gauss_mlc::Error::MismatchedSources(format!(
            "model has k = {}, d = {}; data has k = {}, d = {}",
            model.k(),
            model.d(),
            data.k(),
            data.d()
        ))));
    }
    let mut out = Output::create(&global.out_dir)?;

    let e = err(&model, &data)?;
    let k = data.k() as usize;
    let mut counts = vec![0usize; k * k];
    for (x, y) in data.iter() {
        counts[y.index() * k + model.classify(x).index()] += 1;
    }
    let mut confusion = CsvTable::new(["label", "predicted", "count", "fraction"]);
    for y in 0..k {
        for p in 0..k {
            let c = counts[y * k + p];
            confusion.push(vec![(y + 1).into(), (p + 1).into(), c.into(), (c as f64 / data.len() as f64).into()]);
        }
    }
    out.csv("confusion.csv", &confusion)?;
    let clean_err = clean.as_ref().map(|clean| {
        let wrong = data.iter().zip(clean).filter(|((x, _), y)| model.classify(x) != **y).count();
        wrong as f64 / clean.len() as f64
    });
    let mut decomposition = Value::Null;
    if let Model::Pseudo(w) = &model {
        let mut pairs = CsvTable::new(["i", "j", "err_ij", "std_err"]);
        for ((i, j), v) in w.pairs() {
            let r = err_ij(v, &data, Label::new(i, w.k())?, Label::new(j, w.k())?)?;
            pairs.push(vec![i.into(), j.into(), r.value.into(), r.std_err.into()]);
        }
        out.csv("pairs.csv", &pairs)?;
        decomposition = to_value(&decomposition_check(w, &data)?)?;
    }
    println!("eval: err = {:.6} (s.e. {:.2e}) on {} examples", e.value, e.std_err, e.n);
    let results = json!({
        "err": e.value,
        "err_std_err": e.std_err,
        "n": e.n,
        "clean_err": clean_err,
        "decomposition": decomposition,
    });
    let seeds = json!({ "master": master.value(), "eval": master.derive(stream::EVAL).value() });
    out.finish("eval", to_value(&s)?, seeds, json!({}), results)?;
    Ok(())
}

pub fn geometry(global: &Global, a: &GeometryArgs) -> Result<(), Failure> {
    let mut s: GeometrySpec = spec::load(global.config.as_deref())?;
    if a.model.is_some() {
        s.model = a.model.clone();
    }
    s.k = a.k.unwrap_or(s.k);
    s.d = a.d.unwrap_or(s.d);
    s.trials = a.trials.unwrap_or(s.trials);
    s.n_mc = a.n_mc.unwrap_or(s.n_mc);
    s.seed = global.seed.unwrap_or(s.seed);
    let master = Seed(s.seed);
    if s.n_mc == 0 {
        return Err(Failure::Invalid("n_mc must be at least 1".into()));
    }
    let mc = master.derive(stream::MONTE_CARLO);
    let w: Option<MlcWeights> = if s.trials > 0 {
        if s.model.is_some() {
            return Err(Failure::Invalid("--trials draws random MLCs and cannot be combined with --model".into()));
        }
        None
    } else {
        Some(match &s.model {
            Some(p) => match load_model(p)? {
                Model::Mlc(w) => w,
                Model::Pseudo(_) => return Err(Failure::Invalid("geometry needs an MLC model".into())),
            },
            None => random_unit_mlc(s.k, s.d, master.derive(stream::TRUTH)).map_err(Failure::invalid)?,
        })
    };
    if s.trials > 0 && (s.k < 2 || s.d < 1) {
        return Err(Failure::Invalid(format!("need k >= 2 and d >= 1, got k = {}, d = {}", s.k, s.d)));
    }
    let mut out = Output::create(&global.out_dir)?;

    let results = match w {
        Some(w) => {
            let r = regularity_report(&w, s.n_mc, mc)?;
            let mut t = CsvTable::new(["i", "j", "theta_star", "phi", "t_hat", "ci"]);
            for p in &r.pairs {
                t.push(vec![p.i.into(), p.j.into(), p.theta_star.into(), p.phi.into(), p.t_hat.into(), p.ci.into()]);
            }
            out.csv("geometry.csv", &t)?;
            if s.model.is_none() {
                Model::Mlc(w.clone()).save(&out.path("truth.json"))?;
            }
            json!({ "k": r.k, "d": r.d, "min_phi": r.min_phi(), "min_t_hat": r.min_t_hat() })
        }
        None => {
            let summary = random_mlc_regularity(s.k, s.d, s.trials, s.n_mc, mc)?;
            let mut t = CsvTable::new(["trial", "min_phi", "min_t_hat", "all_phi_one"]);
            let mut points = Vec::new();
            for r in &summary.trials {
                t.push(vec![r.trial.into(), r.min_phi.into(), r.min_t_hat.into(), r.all_phi_one.into()]);
                points.push((r.trial as f64, r.min_phi.unwrap_or(f64::NAN)));
            }
            out.csv("trials.csv", &t)?;
            out.csv("plot_min_phi.csv", &plot_data("trial", "min_phi", &points))?;
            json!({
                "trials": summary.trials.len(),
                "trials_with_phi_one": summary.trials_with_phi_one(),
                "min_phi": summary.min_phi,
                "min_t_hat": summary.min_t_hat,
            })
        }
    };
    println!("geometry: {results}");
    let seeds = json!({
        "master": master.value(),
        "truth": master.derive(stream::TRUTH).value(),
        "monte_carlo": mc.value(),
    });
    out.finish("geometry", to_value(&s)?, seeds, json!({}), results)?;
    Ok(())
}

pub fn lowerbound(global: &Global, a: &LowerboundArgs) -> Result<(), Failure> {
    let mut s: LowerboundSpec = spec::load(global.config.as_deref())?;
    s.k = a.k.unwrap_or(s.k);
    s.d = a.d.unwrap_or(s.d);
    s.l = a.l.unwrap_or(s.l);
    s.eps = a.eps.unwrap_or(s.eps);
    if let Some(n) = &a.n_schedule {
        s.n_schedule = n.clone();
    }
    s.trials = a.trials.unwrap_or(s.trials);
    s.n_eval = a.n_eval.unwrap_or(s.n_eval);
    s.seed = global.seed.unwrap_or(s.seed);
    let master = Seed(s.seed);
    if !(s.l >= 1 && s.l <= s.k && s.k as usize <= s.d) {
        return Err(Failure::Invalid(format!("need 1 <= l <= k <= d, got l = {}, k = {}, d = {}", s.l, s.k, s.d)));
    }
    let bound = 1.0 / (s.l * s.l) as f64;
    if !(s.eps > 0.0 && s.eps <= bound) {
        return Err(Failure::Invalid(format!("eps = {} outside (0, 1/l^2]", s.eps)));
    }
    if s.n_schedule.is_empty() || s.trials == 0 || s.n_eval == 0 {
        return Err(Failure::Invalid("n_schedule, trials and n_eval must be nonempty".into()));
    }
    let mut out = Output::create(&global.out_dir)?;

    let rows = perceptron_lowerbound_experiment(s.k, s.d, s.l, s.eps, &s.n_schedule, s.trials, s.n_eval, master)?;
    out.csv("lowerbound.csv", &lowerbound_table(&rows))?;
    let mut per_trial = CsvTable::new(["n", "trial", "err"]);
    for r in &rows {
        for (t, e) in r.errors.iter().enumerate() {
            per_trial.push(vec![r.n.into(), t.into(), (*e).into()]);
        }
    }
    out.csv("lowerbound_trials.csv", &per_trial)?;
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.median_err)).collect();
    out.csv("plot_lowerbound.csv", &plot_data("n", "median_err", &points))?;
    for r in &rows {
        println!("n = {:>9}: median err {:.4}, {:.0}% of trials at or above {:.4}", r.n, r.median_err, 100.0 * r.fraction_above, r.threshold);
    }
    let results = json!({ "rows": rows.iter().map(|r| json!({ "n": r.n, "median_err": r.median_err, "fraction_above": r.fraction_above })).collect::<Vec<_>>() });
    out.finish("lowerbound", to_value(&s)?, master_json(master), json!({ "threshold": rows[0].threshold }), results)?;
    Ok(())
}

/// `u` rotated by `angle` towards a random direction orthogonal to it.
fn tilt(u: &UnitVector, angle: f64, rng: &mut GaussRng) -> gauss_mlc::Result<UnitVector> {
    loop {
        let r = sample_unit_vector(u.dim(), rng);
        if let Ok(p) = project_orthogonal(&r, u).and_then(|p| normalize(&p)) {
            let raw: Vec<f64> = u.iter().zip(p.iter()).map(|(a, b)| angle.cos() * a + angle.sin() * b).collect();
            return normalize(&raw);
        }
    }
}

const DISAGREEMENT_HEADER: [&str; 12] = [
    "k", "case", "theta", "mass", "std_err", "n_mc", "first_order", "integral", "t_hat", "lower_first_order",
    "upper_first_order", "c2",
];

pub fn lemma_lab(global: &Global, a: &LemmaLabArgs) -> Result<(), Failure> {
    use rand::Rng;
    let mut s: LemmaLabSpec = spec::load(global.config.as_deref())?;
    if let Some(c) = &a.checks {
        s.checks = c.clone();
    }
    s.d = a.d.unwrap_or(s.d);
    s.n_mc = a.n_mc.unwrap_or(s.n_mc);
    s.trials = a.trials.unwrap_or(s.trials);
    s.big_c = a.big_c.unwrap_or(s.big_c);
    s.seed = global.seed.unwrap_or(s.seed);
    s.validate()?;
    let master = Seed(s.seed);
    let mut out = Output::create(&global.out_dir)?;

    let on = |name: &str| s.checks.iter().any(|c| c == name);
    let mut checks = check_table();
    let mut summary = serde_json::Map::new();
    let mut tally = |name: &str, rows: &[gauss_mlc::lemma_lab::CheckResult]| {
        let passed = rows.iter().filter(|r| r.pass).count();
        let worst = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        summary.insert(name.into(), json!({ "cases": rows.len(), "passed": passed, "smallest_margin": worst }));
    };
    if on("correlation") {
        let seed = master.derive(10);
        let w = sample_unit_vector(s.d, &mut seed.derive(0).rng());
        let mut rows = Vec::new();
        for (c, ev) in correlation_event_family(&w, s.trials, seed.derive(1)).iter().enumerate() {
            let r = correlation_bound_check(&w, ev, s.n_mc, seed.derive2(2, c as u64))?;
            checks.push(r.row("correlation", format!("{}_{c}", ev.name())));
            rows.push(r);
        }
        tally("correlation", &rows);
    }
    if on("pgd") {
        let mut rng = master.derive(11).rng();
        let mut rows = Vec::new();
        for c in 0..s.trials {
            let (ws, wt, gh, g, mu) = random_pgd_instance(s.d, c % 2 == 0, &mut rng);
            let r = pgd_inequality_check(&ws, &wt, &gh, &g, mu)?;
            checks.push(r.row("pgd", c));
            rows.push(r);
        }
        tally("pgd", &rows);
    }
    if on("disagreement") {
        let seed = master.derive(12);
        let mut table = CsvTable::new(DISAGREEMENT_HEADER);
        let mut rows = Vec::new();
        let mut rng = seed.derive(0).rng();
        for c in 0..s.trials {
            let k = if c % 2 == 0 { 2 } else { 3 };
            let f = random_unit_mlc(k, s.d, seed.derive2(1, c as u64))?;
            let star = f.pairwise_boundary_direction(1, 2)?;
            let theta = 10f64.powf(rng.random_range(-2.0..0.0));
            let w = tilt(&star, theta, &mut rng)?;
            let r = disagreement_mass(&f, &w, 1, 2, None, s.n_mc, seed.derive2(2, c as u64))?;
            table.push(vec![
                k.into(),
                c.into(),
                r.theta.into(),
                r.mass.into(),
                r.std_err.into(),
                r.n_mc.into(),
                r.first_order.into(),
                r.integral.into(),
                r.t_hat.into(),
                r.lower_first_order.into(),
                r.upper_first_order.into(),
                r.c2.into(),
            ]);
            if k == 2 {
                let chk = r.two_class_check();
                checks.push(chk.row("disagreement_two_class", c));
                rows.push(chk);
            }
        }
        out.csv("disagreement.csv", &table)?;
        tally("disagreement", &rows);
    }
    if on("blowup") {
        let mut rng = master.derive(13).rng();
        let (c, eps) = (1.0, 0.1);
        let mut rows = Vec::new();
        for t in 0..s.trials {
            let k = 2 + t % (s.d.min(6) - 1);
            let w = random_blowup_instance(k, s.d, c, eps, &mut rng);
            let r = weight_blowup_check(&w, c, eps)?;
            checks.push(r.row("blowup", format!("k{k}_{t}")));
            rows.push(r);
        }
        tally("blowup", &rows);
    }
    if on("localization") {
        let sweep = localization_angle_sweep(s.d, s.big_c, s.trials, master.derive(14))?;
        let points: Vec<(f64, f64)> = sweep.ratios.iter().enumerate().map(|(t, r)| (t as f64, *r)).collect();
        out.csv("localization.csv", &plot_data("trial", "ratio", &points))?;
        summary.insert("localization".into(), json!({ "cases": sweep.ratios.len(), "min_ratio": sweep.min_ratio }));
    }
    out.csv("checks.csv", &checks)?;
    let failed = checks.rows().iter().filter(|r| matches!(r[5], Cell::Bool(false))).count();
    println!("lemma-lab: {} checks, {failed} failed", checks.len());
    let results = Value::Object(summary);
    out.finish("lemma-lab", to_value(&s)?, master_json(master), json!({ "blowup_c": 1.0, "blowup_eps": 0.1 }), results)?;
    Ok(())
}
