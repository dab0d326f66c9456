use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use morphdes::json;
use morphdes::model::Severity;
use morphdes::{NodeSolution, SystemModel};
use serde_json::Value;

use crate::api::{self, ApiError, DecisionRef, RankQuery};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CommandOutcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CommandOutcome {
    fn ok(stdout: String) -> Self {
        CommandOutcome {
            code: 0,
            stdout,
            stderr: String::new(),
        }
    }

    fn failed(stdout: String, stderr: String) -> Self {
        CommandOutcome {
            code: 1,
            stdout,
            stderr,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "morphdes",
    version,
    about = "Hierarchical morphological design workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Model file (`.morph` text or a JSON model document).
    model: PathBuf,
    /// Emit JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and validate a model file.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Rank alternatives and compare computed layers with given priorities.
    Rank {
        #[command(flatten)]
        common: Common,
        /// Concordance threshold.
        #[arg(long)]
        p: Option<f64>,
        /// Discordance threshold.
        #[arg(long)]
        q: Option<f64>,
        /// Ignore given priorities.
        #[arg(long)]
        recompute: bool,
    },
    /// Pareto-efficient decisions of a node (the root by default).
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        node: Option<String>,
        #[arg(long, default_value_t = 1)]
        carry_layers: usize,
        /// Rank every leaf instead of using given priorities.
        #[arg(long)]
        recompute: bool,
    },
    /// Size of the full design space.
    Space {
        #[command(flatten)]
        common: Common,
    },
    /// Bottlenecks and proposed actions of one frontier decision.
    Bottlenecks {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        node: String,
        /// Index into the node's frontier.
        #[arg(long)]
        decision: usize,
        #[arg(long, default_value_t = 1)]
        carry_layers: usize,
    },
    /// Evaluate improvement actions on a derived copy of the model.
    Whatif {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        node: String,
        #[arg(long)]
        decision: usize,
        /// `alt:<ID>=<priority>` or `ic:<ID>,<ID>=<level>`; repeatable.
        #[arg(long = "action", required = true)]
        actions: Vec<String>,
        #[arg(long, default_value_t = 1)]
        carry_layers: usize,
    },
    /// Serve the HTTP API on 127.0.0.1.
    Serve {
        model: PathBuf,
        #[arg(long, env = "MORPHDES_PORT", default_value_t = 8080)]
        port: u16,
    },
}

fn read_model(path: &Path, as_json: bool) -> Result<SystemModel, CommandOutcome> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        let message = format!("cannot read {}: {e}", path.display());
        let stdout = if as_json {
            format!(
                "{}\n",
                json::message_error_json("file-not-found", message.clone())
            )
        } else {
            String::new()
        };
        CommandOutcome::failed(stdout, format!("error: {message}\n"))
    })?;
    api::load_model(&text).map_err(|e| {
        let mut stderr = String::new();
        for d in &e.diagnostics {
            let _ = writeln!(stderr, "{}:{d}", path.display());
        }
        let stdout = if as_json {
            format!("{}\n", e.body())
        } else {
            String::new()
        };
        CommandOutcome::failed(stdout, stderr)
    })
}

fn api_failure(e: ApiError, as_json: bool) -> CommandOutcome {
    let stdout = if as_json {
        format!("{}\n", e.body)
    } else {
        String::new()
    };
    CommandOutcome::failed(stdout, format!("error: {}\n", e.message))
}

fn solution_text(solution: &NodeSolution) -> String {
    let mut out = format!(
        "node {}: {} Pareto-efficient decisions ({} feasible)\n",
        solution.node,
        solution.frontier.len(),
        solution.feasible
    );
    for (i, d) in solution.frontier.iter().enumerate() {
        let _ = writeln!(out, "[{i}] {} {}", d.quality, d.key());
    }
    out
}

fn quality(v: &Value) -> String {
    let n: Vec<String> = v["n"]
        .as_array()
        .map(|a| a.iter().map(Value::to_string).collect())
        .unwrap_or_default();
    format!("({}; {})", v["w"], n.join(","))
}

fn str_list(v: &Value, field: &str) -> Vec<String> {
    v.as_array()
        .map(|a| {
            a.iter()
                .filter_map(|x| x[field].as_str().map(str::to_string))
                .collect()
        })
        .unwrap_or_default()
}

fn rank_text(doc: &Value) -> String {
    let a = &doc["agreement"];
    let mut out = format!(
        "p = {}, q = {}, recompute = {}\n",
        doc["params"]["concordance_p"], doc["params"]["discordance_q"], doc["recompute"]
    );
    for leaf in a["leaves"].as_array().into_iter().flatten() {
        let _ = writeln!(
            out,
            "leaf {} (weights of {})",
            leaf["leaf"].as_str().unwrap_or(""),
            leaf["weights_from"].as_str().unwrap_or("")
        );
        for row in leaf["rows"].as_array().into_iter().flatten() {
            let given = row["given"]
                .as_u64()
                .map_or("-".to_string(), |g| g.to_string());
            let alt = row["alternative"].as_str().unwrap_or("");
            let used = doc["priorities"][alt].as_u64().unwrap_or(0);
            let _ = writeln!(
                out,
                "  {alt}: given {given}, computed {}, used {used}",
                row["computed"]
            );
        }
    }
    let _ = writeln!(
        out,
        "agreement: {}/{} exact; ordered pairs {} concordant, {} reversed, {} tied",
        a["exact_matches"],
        a["compared"],
        a["concordant_pairs"],
        a["reversed_pairs"],
        a["tied_pairs"]
    );
    out
}

fn bottlenecks_text(doc: &Value) -> String {
    let d = &doc["decision"];
    let mut out = format!(
        "node {} decision [{}] {} {}\n",
        doc["node"].as_str().unwrap_or(""),
        doc["decision_index"],
        quality(d),
        d["selection"]
    );
    let elements: Vec<String> = doc["elements"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|e| {
            format!(
                "{} (priority {})",
                e["member"].as_str().unwrap_or(""),
                e["priority"]
            )
        })
        .collect();
    let compat: Vec<String> = doc["compat"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|c| {
            format!(
                "({},{}) level {}",
                c["a"].as_str().unwrap_or(""),
                c["b"].as_str().unwrap_or(""),
                c["level"]
            )
        })
        .collect();
    let none = |v: &[String]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.join(", ")
        }
    };
    let _ = writeln!(out, "element bottlenecks: {}", none(&elements));
    let _ = writeln!(out, "compatibility bottlenecks: {}", none(&compat));
    let _ = writeln!(
        out,
        "proposed actions: {}",
        none(&str_list(&doc["actions"], "spec"))
    );
    out
}

fn whatif_text(doc: &Value) -> String {
    let effect = &doc["frontier_effect"];
    let mut out = format!(
        "node {}: {} -> {} ({})\n",
        doc["node"].as_str().unwrap_or(""),
        quality(&doc["quality_before"]),
        quality(&doc["quality_after"]),
        doc["dominance_delta"].as_str().unwrap_or("")
    );
    let _ = writeln!(
        out,
        "actions: {}",
        str_list(&doc["actions"], "spec").join(", ")
    );
    let _ = writeln!(
        out,
        "dominates frontier members {}; on the frontier after: {}",
        effect["dominates"], effect["on_frontier_after"]
    );
    out
}

fn emit(body: String, as_json: bool, text: fn(&Value) -> String) -> CommandOutcome {
    if as_json {
        CommandOutcome::ok(format!("{body}\n"))
    } else {
        let doc: Value = serde_json::from_str(&body).expect("documents are valid JSON");
        CommandOutcome::ok(text(&doc))
    }
}

/// Runs one command line (including the program name) to completion.
pub fn run_cli<I, T>(argv: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                CommandOutcome {
                    code: 2,
                    stdout: String::new(),
                    stderr: text,
                }
            } else {
                CommandOutcome::ok(text)
            };
        }
    };
    match cli.command {
        Command::Serve { model, port } => serve(&model, port),
        Command::Validate { common } => {
            let m = match read_model(&common.model, common.json) {
                Ok(m) => m,
                Err(out) => return out,
            };
            let diags = morphdes::validate(&m);
            let mut stderr = String::new();
            for d in &diags {
                let sev = if d.severity == Severity::Error {
                    "error"
                } else {
                    "warning"
                };
                let _ = writeln!(
                    stderr,
                    "{}: {sev}: {}: {}",
                    common.model.display(),
                    d.path,
                    d.message
                );
            }
            let stdout = if common.json {
                format!("{}\n", json::validate_json(&diags))
            } else {
                format!(
                    "{}: ok ({} leaves, {} alternatives)\n",
                    m.id,
                    m.leaves().len(),
                    total_alternatives(&m)
                )
            };
            CommandOutcome {
                code: 0,
                stdout,
                stderr,
            }
        }
        Command::Rank {
            common,
            p,
            q,
            recompute,
        } => with_model(&common, |m| {
            api::rank(m, &RankQuery { p, q, recompute }).map(|b| emit(b, common.json, rank_text))
        }),
        Command::Solve {
            common,
            node,
            carry_layers,
            recompute,
        } => with_model(&common, |m| {
            let options = api::solve_options(carry_layers, recompute)?;
            let solution = api::solve(m, node.as_deref(), options)?;
            Ok(if common.json {
                CommandOutcome::ok(format!("{}\n", json::frontier_json(&solution)))
            } else {
                CommandOutcome::ok(solution_text(&solution))
            })
        }),
        Command::Space { common } => with_model(&common, |m| {
            Ok(if common.json {
                CommandOutcome::ok(format!("{}\n", api::space(m)))
            } else {
                CommandOutcome::ok(format!("{}\n", morphdes::design_space_size(m)))
            })
        }),
        Command::Bottlenecks {
            common,
            node,
            decision,
            carry_layers,
        } => with_model(&common, |m| {
            let options = api::solve_options(carry_layers, false)?;
            api::bottlenecks(m, &node, decision, options)
                .map(|b| emit(b, common.json, bottlenecks_text))
        }),
        Command::Whatif {
            common,
            node,
            decision,
            actions,
            carry_layers,
        } => with_model(&common, |m| {
            let options = api::solve_options(carry_layers, false)?;
            let specs = api::parse_actions(&actions)?;
            api::whatif(m, &node, &DecisionRef::Index(decision), &specs, options)
                .map(|b| emit(b, common.json, whatif_text))
        }),
    }
}

fn total_alternatives(m: &SystemModel) -> usize {
    m.leaves().iter().map(|l| l.alternatives.len()).sum()
}

fn with_model(
    common: &Common,
    f: impl FnOnce(&SystemModel) -> Result<CommandOutcome, ApiError>,
) -> CommandOutcome {
    match read_model(&common.model, common.json) {
        Ok(m) => f(&m).unwrap_or_else(|e| api_failure(e, common.json)),
        Err(out) => out,
    }
}

fn serve(path: &Path, port: u16) -> CommandOutcome {
    let model = match read_model(path, false) {
        Ok(m) => m,
        Err(out) => return out,
    };
    let runtime = match tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
    {
        Ok(rt) => rt,
        Err(e) => {
            return CommandOutcome::failed(
                String::new(),
                format!("error: cannot start runtime: {e}\n"),
            )
        }
    };
    runtime.block_on(async {
        let listener = match crate::service::bind(port).await {
            Ok(l) => l,
            Err(e) => {
                return CommandOutcome::failed(
                    String::new(),
                    format!("error: cannot listen on 127.0.0.1:{port}: {e}\n"),
                )
            }
        };
        eprintln!("serving {} on http://127.0.0.1:{port}", model.id);
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        match crate::service::serve(listener, model, shutdown).await {
            Ok(()) => CommandOutcome::default(),
            Err(e) => CommandOutcome::failed(String::new(), format!("error: {e}\n")),
        }
    })
}
