mod args;

use std::io::{ErrorKind, Write};
use std::process::ExitCode;

use args::{resolve_config, Cli, Command, RunArgs, ServeArgs};
use clap::Parser;
use shadowseg_core::pipeline::{run_project, Inputs, PipelineError, Stage};
use shadowseg_core::Exec;
use shadowseg_service::ServiceOptions;

const EXIT_FAILURE: u8 = 2;
const EXIT_PORT_IN_USE: u8 = 3;

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Serve(args) => serve(args),
    }
}

fn fail(err: &PipelineError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_FAILURE)
}

fn run(args: RunArgs) -> ExitCode {
    let cwd = std::env::current_dir().unwrap_or_default();
    let cfg = match resolve_config(args.config.as_deref(), &args.params, &cwd) {
        Ok(cfg) => cfg,
        Err(e) => return fail(&PipelineError::new(Stage::Config, e)),
    };
    let inputs = Inputs {
        mask_dir: args.mask_dir,
        lights: args.lights,
        config: args.config,
    };
    let exec = if args.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    match run_project(inputs, &cfg, &args.output, exec) {
        Ok(m) => {
            for t in &m.timings {
                println!("{:<14} {:>9.2} ms", t.stage.name(), t.ms);
            }
            println!(
                "{} outline points, {} triangles, {} segments",
                m.counts.outline_points, m.counts.triangles, m.counts.segments
            );
            println!("wrote {}", m.outputs.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn serve(args: ServeArgs) -> ExitCode {
    let opts = ServiceOptions {
        project: args.project,
        static_dir: args.static_dir,
    };
    let (router, _) = match shadowseg_service::app(&opts) {
        Ok(app) => app,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    let runtime = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    runtime.block_on(async move {
        let listener = match tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: cannot bind {}:{}: {e}", args.host, args.port);
                let code = if e.kind() == ErrorKind::AddrInUse {
                    EXIT_PORT_IN_USE
                } else {
                    EXIT_FAILURE
                };
                return ExitCode::from(code);
            }
        };
        match listener.local_addr() {
            Ok(addr) => println!("listening on http://{addr}"),
            Err(e) => eprintln!("warning: {e}"),
        }
        let _ = std::io::stdout().flush();
        match shadowseg_service::serve(listener, router).await {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_FAILURE)
            }
        }
    })
}
