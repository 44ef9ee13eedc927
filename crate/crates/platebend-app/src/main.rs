use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use platebend::flow::{scheme_registry, StopReason};
use platebend::mesh::save_mesh;
use platebend_app::config::{parse_config, ProblemConfig};
use platebend_app::driver::{run_dynamics, run_preprocess, run_static, RunOutput, StageReport};
use platebend_app::export::{format_stages, write_json, write_log, write_state, Summary};
use platebend_app::setup::Setup;
use platebend_app::study::{format_table, hessian_study};
use platebend_app::{catalog, meshes, AppError};

#[derive(Parser)]
#[command(name = "platebend", version, about = "Thin-plate bending by DG discretization and discrete gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline of a configuration; time-dependent when it has a dynamics section.
    Run {
        config: PathBuf,
        /// Output directory, overriding output.dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the preprocessing stages only.
    Preprocess {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convergence table of the discrete Hessian on uniform grids.
    HessianStudy {
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 2)]
        degree: usize,
    },
    /// Write a bundled mesh, regenerated from its generator ("all" writes every one into a directory).
    Mesh { name: String, output: PathBuf },
    /// List the registered scenarios, schemes and catalog entries.
    List,
}

fn output_dir(config: &ProblemConfig, out: Option<PathBuf>) -> Result<PathBuf, AppError> {
    let dir = out.unwrap_or_else(|| config.resolve(&config.output.dir));
    std::fs::create_dir_all(&dir).map_err(|e| AppError::io(&dir, e))?;
    Ok(dir)
}

fn report_stage(step: Option<usize>, s: &StageReport) {
    let at = step.map(|m| format!("step {m}: ")).unwrap_or_default();
    match s.stopped_by {
        Some(stop) => eprintln!(
            "{at}{} {} iterations ({}), energy {:.6e}, defect {:.6e}",
            s.name,
            s.iterations,
            stop.name(),
            s.energy,
            s.defect
        ),
        None => eprintln!("{at}{} done", s.name),
    }
}

fn write_run(config: &ProblemConfig, dir: &Path, stem: &str, run: &RunOutput) -> Result<(), AppError> {
    if config.output.vtk {
        write_state(&dir.join(format!("{stem}.vtk")), &run.problem, &run.report.y)?;
    }
    if config.output.csv {
        write_log(&dir.join(format!("{stem}.csv")), &run.report)?;
    }
    Ok(())
}

fn run(path: &Path, out: Option<PathBuf>) -> Result<StopReason, AppError> {
    let config = parse_config(path)?;
    let setup = Setup::new(&config)?;
    let dir = output_dir(&config, out)?;
    let prefix = &config.output.prefix;
    if config.dynamics.is_some() {
        let mut last = None;
        let mut rows = Vec::new();
        let steps = run_dynamics(&setup, &mut |m, run| {
            run.stages.iter().for_each(|s| report_stage(Some(m), s));
            write_run(&config, &dir, &format!("{prefix}_step{m:03}"), run)?;
            last = Some((Summary::of(&run.report), run.report.stopped_by));
            Ok(())
        })?;
        for s in &steps {
            rows.extend(s.stages.iter().map(|r| (s.step, s.t, r)));
        }
        let file = dir.join(format!("{prefix}_stages.csv"));
        std::fs::write(&file, format_stages(&rows)).map_err(|e| AppError::io(&file, e))?;
        let (summary, stop) = last.expect("at least one step");
        write_json(&dir.join(format!("{prefix}.json")), &summary)?;
        Ok(stop)
    } else {
        let run = run_static(&setup)?;
        run.stages.iter().for_each(|s| report_stage(None, s));
        write_run(&config, &dir, prefix, &run)?;
        let rows: Vec<_> = run.stages.iter().map(|r| (0, 0.0, r)).collect();
        let file = dir.join(format!("{prefix}_stages.csv"));
        std::fs::write(&file, format_stages(&rows)).map_err(|e| AppError::io(&file, e))?;
        write_json(&dir.join(format!("{prefix}.json")), &Summary::of(&run.report))?;
        Ok(run.report.stopped_by)
    }
}

fn preprocess(path: &Path, out: Option<PathBuf>) -> Result<(), AppError> {
    let config = parse_config(path)?;
    let setup = Setup::new(&config)?;
    let dir = output_dir(&config, out)?;
    let (disc, y, stages) = run_preprocess(&setup)?;
    stages.iter().for_each(|s| report_stage(None, s));
    let stage =
        platebend_app::driver::Stage { bc: setup.boundary_sample(&disc, 0.0, &setup.point_data(0.0, true))?, disc, t: 0.0 };
    let problem = setup.problem(&stage.disc, 0.0, &stage.bc)?;
    let prefix = &config.output.prefix;
    write_state(&dir.join(format!("{prefix}_preprocessed.vtk")), &problem, &y)?;
    let rows: Vec<_> = stages.iter().map(|r| (0, 0.0, r)).collect();
    let file = dir.join(format!("{prefix}_stages.csv"));
    std::fs::write(&file, format_stages(&rows)).map_err(|e| AppError::io(&file, e))
}

fn mesh(name: &str, output: &Path) -> Result<(), AppError> {
    if name == "all" {
        std::fs::create_dir_all(output).map_err(|e| AppError::io(output, e))?;
        for (n, _) in meshes::BUNDLED {
            save_mesh(&meshes::generate_bundled(n)?, output.join(format!("{n}.mesh")))?;
        }
        return Ok(());
    }
    Ok(save_mesh(&meshes::generate_bundled(name)?, output)?)
}

fn list() {
    let section = |title: &str, entries: Vec<(&str, &str)>| {
        println!("{title}:");
        for (n, d) in entries {
            println!("  {n:<18} {d}");
        }
    };
    section("scenarios", catalog::scenarios().describe());
    section("flow schemes", scheme_registry().describe());
    section("metrics", catalog::metrics().describe());
    section("immersions", catalog::immersions().describe());
    section("forces", catalog::forces().describe());
    section("boundary programs", catalog::programs().describe());
    section("bundled meshes", meshes::BUNDLED.to_vec());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => run(&config, out).map(|stop| if stop == StopReason::MaxIter { 4 } else { 0 }),
        Command::Preprocess { config, out } => preprocess(&config, out).map(|_| 0),
        Command::HessianStudy { levels, degree } => hessian_study(levels, degree).map(|rows| {
            print!("{}", format_table(&rows));
            0
        }),
        Command::Mesh { name, output } => mesh(&name, &output).map(|_| 0),
        Command::List => {
            list();
            Ok(0)
        }
    };
    match result {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => {
            eprintln!("flow reached max_iter without meeting the tolerance");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
