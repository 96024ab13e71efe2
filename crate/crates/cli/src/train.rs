//! `train` and `compare`.

use gauss_mlc::data::DatasetSource;
use gauss_mlc::learners::{
    aggregate_train, perceptron_train, trace_rows, trace_table, AggregateResult, GeometryMode, PairOutput,
};
use gauss_mlc::metrics::{err, err_ij, ErrorReport};
use gauss_mlc::model::Model;
use gauss_mlc::regularity::regularity_report;
use gauss_mlc::report::{plot_data, CsvTable};
use gauss_mlc::{Classifier, Dataset, ExampleSource, Label, LearnerKind, MlcWeights, SampleSource, Seed};
use serde_json::{json, Value};

use crate::args::{Algo, CompareArgs, GeometryChoice, Global, TrainArgs};
use crate::output::Output;
use crate::spec::{self, stream, TrainSpec, TruthSpec, ORACLE_T_HAT_FLOOR};
use crate::Failure;

fn resolve_train(global: &Global, path: Option<&std::path::Path>, a: &TrainArgs) -> Result<(TrainSpec, Seed), Failure> {
    let mut s: TrainSpec = spec::load(path.or(global.config.as_deref()))?;
    s.apply(a)?;
    s.seed = global.seed.unwrap_or(s.seed);
    s.validate()?;
    let seed = Seed(s.seed);
    Ok((s, seed))
}

enum TrainSource {
    Synthetic(Box<SampleSource>),
    Data(DatasetSource, usize),
}

/// Everything a training run needs, loaded and checked before any output
/// is written.
struct Prepared {
    spec: TrainSpec,
    master: Seed,
    source: TrainSource,
    holdout: Dataset,
    /// Clean labels of a synthetic holdout.
    clean: Option<Vec<Label>>,
    truth: Option<MlcWeights>,
}

fn mismatch(what: &str, a: (u32, usize), b: (u32, usize)) -> Failure {
    Failure::invalid(gauss_mlc::Error::MismatchedSources(format!(
        "{what}: k = {}, d = {} versus k = {}, d = {}",
        a.0, a.1, b.0, b.1
    )))
}

fn prepare(spec: TrainSpec, master: Seed) -> Result<Prepared, Failure> {
    let shape = spec.source.shape()?;
    let source = match &spec.data {
        Some(p) => {
            let data = Dataset::load(p).map_err(Failure::invalid)?;
            if (data.k(), data.d()) != shape {
                return Err(mismatch("training data and source", (data.k(), data.d()), shape));
            }
            let n = data.len();
            TrainSource::Data(DatasetSource::new(data), n)
        }
        None => TrainSource::Synthetic(Box::new(spec.source.build(master, stream::SOURCE)?)),
    };
    let (holdout, clean) = match &spec.eval_data {
        Some(p) => {
            let data = Dataset::load(p).map_err(Failure::invalid)?;
            if (data.k(), data.d()) != shape {
                return Err(mismatch("evaluation data and source", (data.k(), data.d()), shape));
            }
            (data, None)
        }
        None => {
            let (data, clean) = spec.source.build(master, stream::EVAL)?.draw_with_clean(spec.n_eval);
            (data, Some(clean))
        }
    };
    let truth = match spec.source.truth {
        TruthSpec::HardInstance { .. } => None,
        _ => spec.source.mlc_truth(master)?,
    };
    Ok(Prepared {
        spec,
        master,
        source,
        holdout,
        clean,
        truth,
    })
}

struct Trained {
    model: Model,
    aggregate: Option<AggregateResult>,
    mistakes: Option<u64>,
    samples: u64,
    oracle: Option<Vec<(f64, f64)>>,
}

/// `(T̂, Φ̂)` per pair.
type GeometryTable = Vec<(f64, f64)>;

fn kind(p: &Prepared) -> Result<(LearnerKind, Option<GeometryTable>), Failure> {
    Ok(match p.spec.algo {
        Algo::Perceptron | Algo::AggregateInit => (LearnerKind::Init, None),
        Algo::AggregateLocal3 => (LearnerKind::Local3, None),
        Algo::AggregateLocalk => match p.spec.geometry {
            GeometryChoice::Grid => (LearnerKind::Localk(GeometryMode::Grid), None),
            GeometryChoice::Oracle => {
                let w = p.truth.as_ref().ok_or_else(|| {
                    Failure::Invalid("oracle geometry needs an MLC ground truth; use --geometry grid".into())
                })?;
                let report = regularity_report(w, p.spec.n_mc, p.master.derive(stream::MONTE_CARLO))?;
                let table: Vec<(f64, f64)> = report
                    .pairs
                    .iter()
                    .map(|r| (r.t_hat.max(ORACLE_T_HAT_FLOOR), r.phi.unwrap_or(1.0)))
                    .collect();
                (LearnerKind::Localk(GeometryMode::Oracle(table.clone())), Some(table))
            }
        },
    })
}

fn fit<S: ExampleSource + Sync>(p: &Prepared, source: &mut S) -> Result<Trained, Failure> {
    let master = p.master;
    if p.spec.algo == Algo::Perceptron {
        let out = perceptron_train(source, p.spec.perceptron_n, &mut master.derive(stream::TRAIN).rng())?;
        return Ok(Trained {
            model: Model::Mlc(out.weights),
            aggregate: None,
            mistakes: Some(out.mistakes),
            samples: p.spec.perceptron_n as u64,
            oracle: None,
        });
    }
    let (kind, oracle) = kind(p)?;
    let cfg = p.spec.train.with_seed(master.derive(stream::TRAIN));
    let out = aggregate_train(source, &cfg, &kind)?;
    Ok(Trained {
        model: Model::Pseudo(out.weights.clone()),
        samples: out.samples_drawn(),
        aggregate: Some(out),
        mistakes: None,
        oracle,
    })
}

fn run(p: &Prepared) -> Result<Trained, Failure> {
    match &p.source {
        TrainSource::Synthetic(s) => {
            let mut s = SampleSource::clone(s);
            fit(p, &mut s)
        }
        TrainSource::Data(s, _) => {
            let mut s = s.clone();
            fit(p, &mut s)
        }
    }
}

struct Evaluation {
    err: ErrorReport,
    clean_err: Option<f64>,
}

fn evaluate(p: &Prepared, model: &Model) -> Result<Evaluation, Failure> {
    let e = err(model, &p.holdout)?;
    let clean_err = p.clean.as_ref().map(|clean| {
        let wrong = p
            .holdout
            .iter()
            .zip(clean)
            .filter(|((x, _), y)| model.classify(x) != **y)
            .count();
        wrong as f64 / clean.len() as f64
    });
    Ok(Evaluation { err: e, clean_err })
}

fn seeds_json(master: Seed) -> Value {
    json!({
        "master": master.value(),
        "truth": master.derive(stream::TRUTH).value(),
        "source": master.derive(stream::SOURCE).value(),
        "train": master.derive(stream::TRAIN).value(),
        "eval": master.derive(stream::EVAL).value(),
        "monte_carlo": master.derive(stream::MONTE_CARLO).value(),
    })
}

fn pair_constants(out: &PairOutput) -> Value {
    json!({
        "schedule": out.schedule,
        "sigmas": out.sigmas,
        "angles": out.angles,
        "warm_start_schedule": out.warm_start.as_ref().map(|w| w.schedule),
    })
}

const PAIRS_HEADER: [&str; 12] = [
    "i", "j", "err_ij", "std_err", "n_step", "iters", "mu", "runs", "n_sel", "samples", "selected", "trace_len",
];

fn pairs_table(p: &Prepared, agg: &AggregateResult) -> Result<CsvTable, Failure> {
    let k = p.holdout.k();
    let mut t = CsvTable::new(PAIRS_HEADER);
    for r in &agg.pairs {
        let e = err_ij(&r.output.w, &p.holdout, Label::new(r.i, k)?, Label::new(r.j, k)?)?;
        let s = &r.output.schedule;
        t.push(vec![
            r.i.into(),
            r.j.into(),
            e.value.into(),
            e.std_err.into(),
            s.n.into(),
            s.t.into(),
            s.mu.into(),
            s.runs.into(),
            s.n_sel.into(),
            r.output.trace.samples_drawn.into(),
            r.output.trace.selected.into(),
            r.output.trace.len().into(),
        ]);
    }
    Ok(t)
}

pub fn train(global: &Global, a: &TrainArgs) -> Result<(), Failure> {
    let (spec, master) = resolve_train(global, None, a)?;
    let p = prepare(spec, master)?;
    let mut out = Output::create(&global.out_dir)?;
    let trained = run(&p)?;
    let eval = evaluate(&p, &trained.model)?;

    trained.model.save(&out.path("model.json"))?;
    let mut constants = json!({});
    if let Some(agg) = &trained.aggregate {
        out.csv("pairs.csv", &pairs_table(&p, agg)?)?;
        let algo = p.spec.algo.name();
        let mut trace = trace_table();
        for r in &agg.pairs {
            if let Some(w) = &r.output.warm_start {
                trace_rows(&mut trace, "warm", algo, r.i, r.j, &w.trace, p.spec.timing);
            }
            trace_rows(&mut trace, "main", algo, r.i, r.j, &r.output.trace, p.spec.timing);
            let points: Vec<(f64, f64)> = r
                .output
                .trace
                .records
                .iter()
                .enumerate()
                .map(|(t, rec)| (t as f64, rec.val_err))
                .collect();
            out.csv(&format!("plot_trace_{}_{}.csv", r.i, r.j), &plot_data("t", "val_err", &points))?;
        }
        out.csv("trace.csv", &trace)?;
        let pairs: serde_json::Map<String, Value> = agg
            .pairs
            .iter()
            .map(|r| (format!("{}_{}", r.i, r.j), pair_constants(&r.output)))
            .collect();
        constants = json!({
            "epsilon": p.spec.train.epsilon,
            "delta": p.spec.train.delta,
            "big_c": p.spec.train.big_c,
            "pair_epsilon": agg.pair_epsilon,
            "pair_delta": agg.pair_delta,
            "oracle_geometry": trained.oracle,
            "oracle_t_hat_floor": ORACLE_T_HAT_FLOOR,
            "pairs": pairs,
        });
    }
    let (k, d) = (trained.model.k(), trained.model.d());
    let results = json!({
        "algo": p.spec.algo.name(),
        "k": k,
        "d": d,
        "err": eval.err.value,
        "err_std_err": eval.err.std_err,
        "clean_err": eval.clean_err,
        "n_eval": eval.err.n,
        "samples": trained.samples,
        "training_data_size": match &p.source { TrainSource::Data(_, n) => Some(*n), _ => None },
        "mistakes": trained.mistakes,
        "calibration_samples": spec::calibration_samples(&p.spec.source.noise),
    });
    println!(
        "{}: err = {:.6} (s.e. {:.2e}), clean err = {}",
        p.spec.algo.name(),
        eval.err.value,
        eval.err.std_err,
        eval.clean_err.map_or("n/a".into(), |e| format!("{e:.6}"))
    );
    out.finish("train", serde_json::to_value(&p.spec).map_err(anyhow::Error::from)?, seeds_json(master), constants, results)?;
    Ok(())
}

/// Two-sided sign test: `P[|W − n/2| ≥ |w − n/2|]` for `W ~ Bin(n, 1/2)`,
/// where `n = wins + losses`.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = wins + losses;
    if n == 0 {
        return 1.0;
    }
    let m = wins.min(losses);
    // pmf(i) = C(n, i) / 2^n, accumulated in log space to avoid overflow.
    let mut log_c = 0.0f64;
    let mut tail = 0.0;
    for i in 0..=m {
        if i > 0 {
            log_c += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        tail += (log_c - n as f64 * std::f64::consts::LN_2).exp();
    }
    (2.0 * tail).min(1.0)
}

pub fn compare(global: &Global, a: &CompareArgs) -> Result<(), Failure> {
    let (mut spec_a, _) = resolve_train(global, a.config_a.as_deref(), &a.train)?;
    let (mut spec_b, _) = resolve_train(global, a.config_b.as_deref(), &a.train)?;
    spec_a.algo = a.algo_a.unwrap_or(spec_a.algo);
    spec_b.algo = a.algo_b.unwrap_or(spec_b.algo);
    spec_a.validate()?;
    spec_b.validate()?;
    let seeds = a.seeds.unwrap_or(5);
    if seeds == 0 {
        return Err(Failure::Invalid("--seeds must be at least 1".into()));
    }
    if spec_a.source != spec_b.source
        || spec_a.data != spec_b.data
        || spec_a.eval_data != spec_b.eval_data
        || spec_a.n_eval != spec_b.n_eval
    {
        return Err(Failure::invalid(gauss_mlc::Error::MismatchedSources(
            "the two configurations must share source, data and evaluation size".into(),
        )));
    }
    let base = global.seed.unwrap_or(spec_a.seed);
    spec_a.seed = base;
    spec_b.seed = base;
    let mut prepared = Vec::with_capacity(seeds as usize);
    for s in 0..seeds {
        let master = Seed(base.wrapping_add(s));
        prepared.push((prepare(spec_a.clone(), master)?, prepare(spec_b.clone(), master)?));
    }
    let mut out = Output::create(&global.out_dir)?;

    let mut table = CsvTable::new(["seed", "err_a", "err_b", "diff", "b_not_worse"]);
    let mut points = Vec::new();
    let (mut wins, mut losses) = (0usize, 0usize);
    for (pa, pb) in &prepared {
        let seed = pa.master.value();
        let ea = evaluate(pa, &run(pa)?.model)?.err.value;
        let eb = evaluate(pb, &run(pb)?.model)?.err.value;
        let diff = eb - ea;
        if diff < 0.0 {
            wins += 1;
        } else if diff > 0.0 {
            losses += 1;
        }
        table.push(vec![seed.into(), ea.into(), eb.into(), diff.into(), (diff <= 0.0).into()]);
        points.push((seed as f64, diff));
    }
    out.csv("compare.csv", &table)?;
    out.csv("plot_compare.csv", &plot_data("seed", "diff", &points))?;
    let p_value = sign_test(wins, losses);
    let ties = seeds as usize - wins - losses;
    println!(
        "compare {} vs {}: b better on {wins}, worse on {losses}, tied on {ties}; sign test p = {p_value:.4}",
        spec_a.algo.name(),
        spec_b.algo.name()
    );
    let config = json!({
        "a": spec_a,
        "b": spec_b,
        "seeds": seeds,
    });
    let seeds_list: Vec<u64> = (0..seeds).map(|s| base.wrapping_add(s)).collect();
    let results = json!({
        "b_better": wins,
        "b_worse": losses,
        "ties": ties,
        "sign_test_p": p_value,
    });
    out.finish("compare", config, json!({ "masters": seeds_list }), json!({}), results)?;
    Ok(())
}
