use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nspm::pipeline::{Pipeline, PipelineConfig, PipelineError, StageManifest};

/// Builds question/SPARQL corpora from a knowledge graph and trains
/// translators between them.
#[derive(Parser, Debug)]
#[command(name = "nspm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Pipeline configuration file (TOML)
    #[arg(short, long, value_name = "PATH")]
    config: PathBuf,
    /// Override a configuration value, e.g. `--set train.max_steps=500`
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args, Debug)]
struct ModelArg {
    /// Checkpoint to use instead of `<out>/train/model.nspm`
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fetch class metadata and generate templates up to the configured depth
    GenerateTemplates(Common),
    /// Rank templates by entity popularity and apply the per-class filter
    Rank(Common),
    /// Instantiate kept templates into question/query pairs
    BuildDataset(Common),
    /// Partition the dataset under the configured split policy
    Split(Common),
    /// Train a translator on the split
    Train(Common),
    /// Translate questions read line by line from standard input
    Translate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Score a trained model on the test split
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArg,
    },
    /// Train and score every configuration of the experiment grid
    Grid(Common),
    /// Export attention heat-maps as TSV and PGM
    Heatmap {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArg,
        /// Question to map; repeatable. Defaults to test questions
        #[arg(short, long, value_name = "TEXT")]
        question: Vec<String>,
        /// Number of test questions to map when no question is given
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
}

fn pipeline(common: &Common) -> Result<Pipeline, PipelineError> {
    Ok(Pipeline::new(PipelineConfig::load(&common.config, &common.overrides)?))
}

fn report(stage: &str, m: &StageManifest) {
    eprintln!("{stage}: {} files written, {}", m.outputs.len(), m.summary);
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::GenerateTemplates(c) => report("generate-templates", &pipeline(&c)?.generate_templates()?),
        Command::Rank(c) => report("rank", &pipeline(&c)?.rank()?),
        Command::BuildDataset(c) => report("build-dataset", &pipeline(&c)?.build_dataset()?),
        Command::Split(c) => report("split", &pipeline(&c)?.split()?),
        Command::Train(c) => report("train", &pipeline(&c)?.train()?),
        Command::Translate { common, model } => {
            let stdin = std::io::stdin().lock();
            let stdout = std::io::stdout().lock();
            pipeline(&common)?.translate(model.model.as_deref(), stdin, stdout)?;
        }
        Command::Evaluate { common, model } => report("evaluate", &pipeline(&common)?.evaluate(model.model.as_deref())?),
        Command::Grid(c) => {
            let rows = pipeline(&c)?.grid()?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            eprintln!("grid: {} cells, {failed} failed", rows.len());
        }
        Command::Heatmap { common, model, question, count } => {
            report("heatmap", &pipeline(&common)?.heatmap(model.model.as_deref(), &question, count)?)
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors count as validation failures.
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {:#}", anyhow::Error::new(e));
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }
}
