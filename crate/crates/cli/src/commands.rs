use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dynjudge::domain::json::{self, JsonError, Strictness};
use dynjudge::domain::{validate_dataset, Query, RuleSet, TemplateLibrary};
use dynjudge::engine::{Engine, StageConfig};
use dynjudge::eval::{ablate, run_benchmark, write_benchmark, AblationPlan};
use dynjudge::gateway::Gateway;
use dynjudge::library::{build_library, write_build, EvalRecord, ScoreRecord};
use dynjudge::preference::{build_pairs, train, PreferencePair, PreferenceScorer};
use dynjudge::selector::{LocalScorer, NllScorer, Selector};
use dynjudge::{Error, ScorerParams};
use serde::Serialize;

use crate::args::*;
use crate::config::{strictness, AppConfig};
use crate::CliError;

struct Ctx {
    cfg: AppConfig,
    mode: Strictness,
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx {
        cfg: AppConfig::resolve(&cli.global)?,
        mode: strictness(&cli.global),
    };
    match cli.command {
        Command::BuildLibrary(a) => ctx.build_library(a),
        Command::BuildPairs(a) => ctx.build_pairs(a),
        Command::TrainSelector(a) => ctx.train_selector(a),
        Command::Select(a) => ctx.select(a),
        Command::Adjudicate(a) => ctx.adjudicate(a),
        Command::Evaluate(a) => ctx.evaluate(a),
        Command::Ablate(a) => ctx.ablate(a),
        Command::Synth(a) => synth(a),
    }
}

fn print_json<T: Serialize>(value: &T) {
    print!("{}", json::to_pretty(value));
}

fn read_text(path: &Path) -> Result<String, JsonError> {
    std::fs::read_to_string(path).map_err(|source| JsonError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(dir: &Path) -> Result<(), JsonError> {
    std::fs::create_dir_all(dir).map_err(|source| JsonError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn pick(flag: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str, name: &str) -> Result<PathBuf, CliError> {
    flag.clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| CliError::missing(what, &format!("--{name}"), &format!("paths.{name}")))
}

fn stages_from(base: &StageConfig, a: &StageArgs) -> StageConfig {
    let mut cfg = base.clone();
    if a.no_evidence {
        cfg.stages_enabled.evidence = false;
        cfg.stages_enabled.adjudication = false;
    }
    if a.no_adjudication {
        cfg.stages_enabled.adjudication = false;
    }
    cfg
}

impl Ctx {
    fn rules(&self, path: &Path) -> Result<RuleSet, CliError> {
        let rules: RuleSet = json::read_file(path, self.mode)?;
        Error::check(&format!("rule set {}", path.display()), rules.validate())?;
        Ok(rules)
    }

    fn dataset(&self, path: &Path, rules: Option<&RuleSet>) -> Result<Vec<Query>, CliError> {
        let queries: Vec<Query> = json::read_jsonl(path, self.mode)?;
        Error::check(&format!("dataset {}", path.display()), validate_dataset(&queries, rules))?;
        Ok(queries)
    }

    fn library(&self, flag: &Option<PathBuf>) -> Result<TemplateLibrary, CliError> {
        let path = pick(flag, &self.cfg.paths.library, "template library", "library")?;
        let lib: TemplateLibrary = json::read_file(&path, self.mode)?;
        Error::check(&format!("library {}", path.display()), lib.validate())?;
        Ok(lib)
    }

    fn selector(&self, a: &SelectorArgs, gateway: &Gateway) -> Result<Selector, CliError> {
        let records_path = pick(&a.records, &self.cfg.paths.records, "evaluation records", "records")?;
        let records: Vec<EvalRecord> = json::read_file(&records_path, self.mode)?;
        let mut cfg = self.cfg.selector.clone();
        if let Some(lambda) = a.lambda {
            cfg.lambda = lambda;
        }
        if let Some(n) = a.candidates {
            cfg.n_candidates = n;
        }
        cfg.validate()?;
        let scorer: Arc<dyn LocalScorer> = match a.params.clone().or_else(|| self.cfg.paths.params.clone()) {
            Some(path) => {
                let params: ScorerParams = json::read_file(&path, self.mode)?;
                params.validate()?;
                Arc::new(PreferenceScorer::new(params, a.beta.unwrap_or(self.cfg.trainer.beta)))
            }
            None => Arc::new(NllScorer::new(gateway.clone())),
        };
        Ok(Selector::new(cfg, records, scorer))
    }

    fn engine(&self, rules: RuleSet, stages: StageConfig) -> Result<Engine, CliError> {
        let gateway = self.cfg.gateway(self.mode)?;
        Ok(Engine::new(gateway, rules, stages)?)
    }

    fn build_library(&self, a: BuildLibraryArgs) -> Result<(), CliError> {
        let mut pc = self.cfg.pipeline.clone();
        if let Some(m) = a.m {
            pc.m = m;
        }
        if a.k.is_some() {
            pc.k = a.k;
        }
        if let Some(v) = a.v {
            pc.v = v;
        }
        if let Some(r) = a.r {
            pc.r = r;
        }
        if let Some(theta) = a.theta {
            pc.theta = theta;
        }
        if let Some(seed) = a.seed {
            pc.rng_seed = seed;
        }
        pc.validate()?;
        let context = read_text(&a.context)?;
        let rules = self.rules(&a.rules)?;
        let dataset = self.dataset(&a.dataset, Some(&rules))?;
        let engine = self.engine(rules, self.cfg.stages.clone())?;
        let out = build_library(&engine, context.trim_end(), &dataset, &pc)?;
        create_dir(&a.out)?;
        write_build(&a.out, &out)?;
        print_json(&serde_json::json!({
            "counts": out.counts,
            "retained": out.library.retained().map(|t| t.id.as_str()).collect::<Vec<_>>(),
            "dataset_id": out.subset.dataset_id,
        }));
        Ok(())
    }

    fn build_pairs(&self, a: BuildPairsArgs) -> Result<(), CliError> {
        let scores: Vec<ScoreRecord> = json::read_jsonl(&a.scores, self.mode)?;
        let queries = self.dataset(&a.queries, None)?;
        let per_category = a.pairs_per_category.unwrap_or(self.cfg.trainer.pairs_per_category);
        let pairs = build_pairs(&scores, &queries, per_category, a.seed.unwrap_or(self.cfg.trainer.rng_seed));
        json::write_jsonl(&a.out, &pairs)?;
        print_json(&serde_json::json!({ "pairs": pairs.len() }));
        Ok(())
    }

    fn train_selector(&self, a: TrainSelectorArgs) -> Result<(), CliError> {
        let mut tc = self.cfg.trainer.clone();
        if let Some(beta) = a.beta {
            tc.beta = beta;
        }
        if let Some(epochs) = a.epochs {
            tc.epochs = epochs;
        }
        if let Some(seed) = a.seed {
            tc.rng_seed = seed;
        }
        if let Some(lr) = a.learning_rate {
            tc.learning_rate = lr;
        }
        if let Some(b) = a.batch_size {
            tc.batch_size = b;
        }
        if let Some(d) = a.feature_dim {
            tc.feature_dim = d;
        }
        let pairs: Vec<PreferencePair> = json::read_jsonl(&a.pairs, self.mode)?;
        let queries = self.dataset(&a.queries, None)?;
        let lib = self.library(&a.library)?;
        let outcome = train(&pairs, &queries, &lib.templates, &tc)?;
        json::write_file(&a.out, &outcome.params)?;
        print_json(&serde_json::json!({
            "pairs": pairs.len(),
            "epochs": tc.epochs,
            "loss_trace": outcome.loss_trace,
        }));
        Ok(())
    }

    fn select(&self, a: SelectArgs) -> Result<(), CliError> {
        let query: Query = json::read_file(&a.query, self.mode)?;
        let lib = self.library(&a.selector.library)?;
        let gateway = self.cfg.gateway(self.mode)?;
        let result = self.selector(&a.selector, &gateway)?.select(&query, &lib)?;
        print_json(&result);
        Ok(())
    }

    fn adjudicate(&self, a: AdjudicateArgs) -> Result<(), CliError> {
        let query: Query = match &a.query {
            Some(path) => json::read_file(path, self.mode)?,
            None => {
                let mut text = String::new();
                std::io::stdin().read_to_string(&mut text).map_err(|source| JsonError::Io {
                    path: "<stdin>".into(),
                    source,
                })?;
                json::from_str(&text, self.mode, "<stdin>")?
            }
        };
        let rules = self.rules(&a.rules)?;
        let lib = self.library(&a.selector.library)?;
        let engine = self
            .engine(rules, stages_from(&self.cfg.stages, &a.stages))?
            .capture_timings(a.timings);
        let selector = self.selector(&a.selector, engine.gateway())?;
        let trace = engine.run_pipeline(&query, &lib, &selector)?;
        if let Some(path) = &a.trace {
            json::write_file(path, &trace)?;
        }
        print_json(&trace.final_judgment);
        Ok(())
    }

    fn evaluate(&self, a: EvaluateArgs) -> Result<(), CliError> {
        let rules = self.rules(&a.rules)?;
        let dataset = self.dataset(&a.dataset, Some(&rules))?;
        let lib = self.library(&a.selector.library)?;
        let engine = self.engine(rules, stages_from(&self.cfg.stages, &a.stages))?;
        let selector = self.selector(&a.selector, engine.gateway())?;
        let run = run_benchmark(&engine, &selector, &dataset, &lib)?;
        create_dir(&a.out)?;
        write_benchmark(&a.out, &run)?;
        print_json(&run.report);
        Ok(())
    }

    fn ablate(&self, a: AblateArgs) -> Result<(), CliError> {
        let plan: AblationPlan = json::read_file(&a.plan, self.mode)?;
        let rules = self.rules(&a.rules)?;
        let dataset = self.dataset(&a.dataset, Some(&rules))?;
        let lib = self.library(&a.selector.library)?;
        let engine = self.engine(rules, self.cfg.stages.clone())?;
        let selector = self.selector(&a.selector, engine.gateway())?;
        let table = ablate(&engine, &selector, &dataset, &lib, &plan)?;
        create_dir(&a.out)?;
        table.write(&a.out)?;
        print_json(&table);
        Ok(())
    }
}

fn synth(a: SynthArgs) -> Result<(), CliError> {
    create_dir(&a.out)?;
    dynjudge::synthetic::write_all(&a.out)?;
    Ok(())
}
