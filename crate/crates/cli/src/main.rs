mod args;
mod commands;
mod config;
mod context;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use context::Context;
use output::{emit, Failure};

fn name(command: &Command) -> &'static str {
    match command {
        Command::MiCheck { .. } => "mi-check",
        Command::MonoTest { .. } => "mono-test",
        Command::MonoHunt { .. } => "mono-hunt",
        Command::BmTest { .. } => "bm-test",
        Command::Bm2Test { .. } => "bm2-test",
        Command::Eval { .. } => "eval",
        Command::Mollify { .. } => "mollify",
        Command::IbpCheck { .. } => "ibp-check",
        Command::CylinderCheck { .. } => "cylinder-check",
        Command::Dimred { .. } => "dimred",
        Command::Corpus { .. } => "corpus",
    }
}

fn run(command: Command) -> Result<ExitCode, Failure> {
    let label = name(&command);
    let (ctx, (inputs, outcome)) = match command {
        Command::MiCheck { common } => {
            let ctx = Context::new(common)?;
            let r = commands::mi_check(&ctx)?;
            (ctx, r)
        }
        Command::MonoTest { common, pairs } => {
            let ctx = Context::new(common)?;
            let r = commands::mono_test(&ctx, pairs)?;
            (ctx, r)
        }
        Command::MonoHunt { common } => {
            let ctx = Context::new(common)?;
            let r = commands::mono_hunt(&ctx)?;
            (ctx, r)
        }
        Command::BmTest { common, inner, outer, t } => {
            let ctx = Context::new(common)?;
            let r = commands::bm_test(&ctx, &inner, &outer, t)?;
            (ctx, r)
        }
        Command::Bm2Test { common, body, phi, search } => {
            let ctx = Context::new(common)?;
            let r = commands::bm2_test(&ctx, body.as_deref(), phi.as_deref(), search)?;
            (ctx, r)
        }
        Command::Eval { common, body } => {
            let ctx = Context::new(common)?;
            let r = commands::eval(&ctx, &body)?;
            (ctx, r)
        }
        Command::Mollify { common, k, samples, check_mi } => {
            let ctx = Context::new(common)?;
            let r = commands::mollify(&ctx, k, samples, check_mi)?;
            (ctx, r)
        }
        Command::IbpCheck { common, body, phi } => {
            let ctx = Context::new(common)?;
            let r = commands::ibp_check(&ctx, &body, &phi)?;
            (ctx, r)
        }
        Command::CylinderCheck { common, planar, radius, deltas } => {
            let ctx = Context::new(common)?;
            let r = commands::cylinder_check(&ctx, &planar, radius, deltas.as_deref())?;
            (ctx, r)
        }
        Command::Dimred { common, planar, radii, deltas } => {
            let ctx = Context::new(common)?;
            let r = commands::dimred(&ctx, &planar, radii.as_deref(), deltas.as_deref())?;
            (ctx, r)
        }
        Command::Corpus { common, size, pairs } => {
            let ctx = Context::new(common)?;
            let r = commands::corpus_run(&ctx, size, pairs)?;
            (ctx, r)
        }
    };
    emit(label, &inputs, &outcome, ctx.common.out.as_deref(), ctx.common.csv.as_deref())?;
    Ok(outcome.status.code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("mixedarea: {}", failure.message());
            failure.code()
        }
    }
}
