use std::fmt::Write;

use gbh_core::{bound_curve, DomainCheck};

use crate::error::CliResult;
use crate::output::write_all;
use crate::CurveArgs;

pub fn run(args: &CurveArgs) -> CliResult<()> {
    let check = if args.force {
        DomainCheck::Exploratory
    } else {
        DomainCheck::Theorem
    };
    // Evaluate first so a domain error never leaves a truncated file behind.
    let rows = bound_curve(&args.lambdas.0, &args.rhos.0, args.alpha, check)?;
    let mut csv = String::from("lambda,rho,bound,ratio\n");
    for r in rows {
        let _ = writeln!(csv, "{},{},{},{}", r.lambda, r.rho, r.bound, r.ratio);
    }
    write_all(args.out.as_deref(), csv.as_bytes())
}
