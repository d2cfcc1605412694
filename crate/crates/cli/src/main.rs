//! `pupta`: validate models, list parameter regions, check and synthesize
//! reachability, and simulate concrete runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use pupta::automaton::{Automaton, Flavor};
use pupta::concrete::{self, ConcreteRun};
use pupta::frontend::{self, rational, JsonRegion};
use pupta::param_region::RegionSpace;
use pupta::region_automaton;
use pupta::synthesis::{self, parameter_groups, Engine, SynthesisResult};

#[derive(Parser)]
#[command(name = "pupta", version, about = "Reachability and parameter synthesis for timed automata with parametric clock updates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    U2p,
    Ru2p,
    Sru2p,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Symbolic,
    Oracle,
    Both,
}

impl From<EngineArg> for Engine {
    fn from(e: EngineArg) -> Engine {
        match e {
            EngineArg::Symbolic => Engine::Symbolic,
            EngineArg::Oracle => Engine::Oracle,
            EngineArg::Both => Engine::Both,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural restrictions of a model.
    Validate {
        file: PathBuf,
        /// Defaults to the stopwatch flavor when some location stops a clock.
        #[arg(long, value_enum)]
        flavor: Option<FlavorArg>,
    },
    /// List the parameter regions of a model.
    Regions {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Decide whether some parameter valuation reaches a location.
    Check {
        file: PathBuf,
        #[arg(long)]
        goal: String,
        #[arg(long, value_enum, default_value = "symbolic")]
        engine: EngineArg,
        /// Print a symbolic witness and a concrete run for the first reaching region.
        #[arg(long)]
        witness: bool,
        /// Exit with status 1 when the goal is reachable.
        #[arg(long)]
        expect_unreachable: bool,
    },
    /// Compute every region under which a location is reachable.
    Synth {
        file: PathBuf,
        #[arg(long)]
        goal: String,
        #[arg(long, value_enum, default_value = "symbolic")]
        engine: EngineArg,
        #[arg(long, conflicts_with = "text")]
        json: bool,
        #[arg(long)]
        text: bool,
        /// Include a concrete witness run for each reaching region.
        #[arg(long)]
        witness: bool,
    },
    /// Random concrete runs at one parameter valuation.
    Simulate {
        file: PathBuf,
        /// For example "p1=3/2,p2=5/4".
        #[arg(long)]
        valuation: String,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn load(path: &Path) -> Result<Automaton, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    frontend::parse_model(&text).map_err(|d| usage(format!("{}:{d}", path.display())))
}

fn goal_of(a: &Automaton, goal: &str) -> Result<usize, Failure> {
    a.location(goal).map_err(|e| usage(e.to_string()))
}

#[derive(Serialize)]
struct TraceStep {
    location: String,
    clocks: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delay: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge: Option<usize>,
}

fn trace(a: &Automaton, run: &ConcreteRun) -> Vec<TraceStep> {
    run.states
        .iter()
        .enumerate()
        .map(|(i, (l, w))| TraceStep {
            location: a.locations[*l].name.clone(),
            clocks: a.clocks.iter().cloned().zip(w.iter().map(rational)).collect(),
            delay: run.steps.get(i).map(|s| rational(&s.delay)),
            edge: run.steps.get(i).map(|s| s.edge),
        })
        .collect()
}

fn trace_text(a: &Automaton, run: &ConcreteRun) -> String {
    let mut out = String::new();
    for (i, (l, w)) in run.states.iter().enumerate() {
        let vals: Vec<String> = a.clocks.iter().zip(w).map(|(c, x)| format!("{c}={x}")).collect();
        out.push_str(&format!("  {} [{}]\n", a.locations[*l].name, vals.join(", ")));
        if let Some(s) = run.steps.get(i) {
            let e = &a.edges[s.edge];
            let label = e.action.clone().unwrap_or_else(|| format!("edge {}", s.edge));
            out.push_str(&format!("    wait {} then {label}\n", s.delay));
        }
    }
    out
}

/// Concrete run for a reaching region, replayed before it is returned.
fn concrete_witness(res: &SynthesisResult, index: usize) -> Result<Option<ConcreteRun>, Failure> {
    let v = &res.verdicts[index];
    let Some(run) = &v.witness else { return Ok(None) };
    let rep = &v.region.representative;
    let ta = res.model.instantiate(rep).map_err(|e| usage(e.to_string()))?;
    let cr = region_automaton::concretize_witness(run, &res.model, &v.region, rep)
        .map_err(|e| Failure { code: 2, message: format!("internal error: {e}") })?;
    concrete::replay(&cr, &ta, res.model.has_stops())
        .map_err(|e| Failure { code: 2, message: format!("internal error: witness fails replay: {e}") })?;
    Ok(Some(cr.unscaled(ta.scale)))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { file, flavor } => {
            let a = load(&file)?;
            let flavor = match flavor {
                Some(FlavorArg::U2p) => Flavor::U2p,
                Some(FlavorArg::Ru2p) => Flavor::Ru2p,
                Some(FlavorArg::Sru2p) => Flavor::Sru2p,
                None if a.has_stops() => Flavor::Sru2p,
                None => Flavor::Ru2p,
            };
            let violations = a.validate(flavor);
            if violations.is_empty() {
                println!("ok");
                return Ok(());
            }
            let mut msg = Vec::new();
            for v in violations {
                match v.edge {
                    Some(i) => {
                        let e = &a.edges[i];
                        msg.push(format!(
                            "edge {i} ({} -> {}): {}",
                            a.locations[e.src].name, a.locations[e.dst].name, v.clause
                        ));
                    }
                    None => msg.push(v.clause.to_string()),
                }
            }
            Err(Failure { code: 1, message: msg.join("\n") })
        }
        Command::Regions { file, json } => {
            let a = load(&file)?.with_aux();
            let space = RegionSpace::with_groups(&a.bounds(), parameter_groups(&a)).map_err(|e| usage(e.to_string()))?;
            let regions = space.enumerate();
            if json {
                let out: Vec<JsonRegion> = regions.iter().map(|r| frontend::region_json(&space, r, &a)).collect();
                println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
            } else {
                for r in &regions {
                    println!("{}", frontend::region_text(&space, r, &a));
                }
                println!("{} regions", regions.len());
            }
            Ok(())
        }
        Command::Check { file, goal, engine, witness, expect_unreachable } => {
            let a = load(&file)?;
            let g = goal_of(&a, &goal)?;
            let res = synthesis::ef_synth(&a, g, engine.into()).map_err(|e| usage(e.to_string()))?;
            let reaching: Vec<usize> = (0..res.verdicts.len()).filter(|i| res.verdicts[*i].reachable).collect();
            if reaching.is_empty() {
                println!("Empty: `{goal}` is unreachable for every valuation ({} regions)", res.verdicts.len());
            } else {
                println!("NonEmpty: `{goal}` is reachable in {} of {} regions", reaching.len(), res.verdicts.len());
                if witness {
                    let first = &res.verdicts[reaching[0]];
                    println!("region: {}", frontend::region_text(&res.space, &first.region, &res.model));
                    if let Some(run) = &first.witness {
                        print!("{}", run.dump(&res.model));
                    }
                    if let Some(cr) = concrete_witness(&res, reaching[0])? {
                        println!("concrete run:");
                        print!("{}", trace_text(&res.model, &cr));
                    }
                }
            }
            if expect_unreachable && !reaching.is_empty() {
                return Err(Failure { code: 1, message: format!("`{goal}` is reachable") });
            }
            Ok(())
        }
        Command::Synth { file, goal, engine, json, text: _, witness } => {
            let a = load(&file)?;
            let g = goal_of(&a, &goal)?;
            let res = synthesis::ef_synth(&a, g, engine.into()).map_err(|e| usage(e.to_string()))?;
            let reaching: Vec<usize> = (0..res.verdicts.len()).filter(|i| res.verdicts[*i].reachable).collect();
            if json {
                #[derive(Serialize)]
                struct Entry {
                    #[serde(flatten)]
                    region: JsonRegion,
                    #[serde(skip_serializing_if = "Option::is_none")]
                    witness: Option<Vec<TraceStep>>,
                }
                #[derive(Serialize)]
                struct Out {
                    goal: String,
                    engine: &'static str,
                    total_regions: usize,
                    reaching: Vec<Entry>,
                }
                let mut entries = Vec::new();
                for &i in &reaching {
                    let w = if witness { concrete_witness(&res, i)?.map(|r| trace(&res.model, &r)) } else { None };
                    entries.push(Entry { region: frontend::region_json(&res.space, &res.verdicts[i].region, &res.model), witness: w });
                }
                let out = Out {
                    goal,
                    engine: match res.engine {
                        Engine::Symbolic => "symbolic",
                        Engine::Oracle => "oracle",
                        Engine::Both => "both",
                    },
                    total_regions: res.verdicts.len(),
                    reaching: entries,
                };
                println!("{}", serde_json::to_string_pretty(&out).expect("serializable"));
            } else {
                println!("goal `{goal}` is reachable in {} of {} regions", reaching.len(), res.verdicts.len());
                for &i in &reaching {
                    println!("{}", frontend::region_text(&res.space, &res.verdicts[i].region, &res.model));
                    if witness {
                        if let Some(cr) = concrete_witness(&res, i)? {
                            print!("{}", trace_text(&res.model, &cr));
                        }
                    }
                }
            }
            Ok(())
        }
        Command::Simulate { file, valuation, steps, seed } => {
            let a = load(&file)?.with_aux();
            let v = frontend::parse_valuation(&valuation, &a).map_err(usage)?;
            let ta = a.instantiate(&v).map_err(|e| usage(e.to_string()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let run = concrete::simulate(&ta, steps, a.has_stops(), &mut rng);
            concrete::replay(&run, &ta, a.has_stops())
                .map_err(|e| Failure { code: 2, message: format!("internal error: {e}") })?;
            print!("{}", trace_text(&a, &run.unscaled(ta.scale)));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
