use std::fmt::Write;

use gbh_core::{fdr_bound_aform_with, fdr_bound_with, BoundBreakdown, BoundInput, DomainCheck};
use serde::Serialize;

use crate::error::CliResult;
use crate::output::{json, write_all};
use crate::{BoundArgs, Format};

#[derive(Serialize)]
struct BothForms {
    rho_form: BoundBreakdown,
    a_form: BoundBreakdown,
    max_term_rel_diff: f64,
}

fn rel(x: f64, y: f64) -> f64 {
    if x == y {
        0.0
    } else {
        (x - y).abs() / x.abs().max(y.abs())
    }
}

fn table(b: &BoundBreakdown, out: &mut String) {
    let i = &b.input;
    let _ = writeln!(
        out,
        "{:?}: lambda = {}, rho = {}, alpha = {}, in theorem domain: {}",
        b.parameterization, i.lambda, i.rho, i.alpha, b.in_theorem_domain
    );
    for (k, t) in b.terms.iter().enumerate() {
        let _ = writeln!(out, "  term {}  {t:.12e}", k + 1);
    }
    let _ = writeln!(out, "  total   {:.12e}", b.total);
    let _ = writeln!(out, "  ratio   {:.6}", b.ratio);
}

pub fn run(args: &BoundArgs) -> CliResult<()> {
    let check = if args.force {
        DomainCheck::Exploratory
    } else {
        DomainCheck::Theorem
    };
    let input = BoundInput::new(args.lambda, args.rho, args.alpha);
    let rho_form = fdr_bound_with(&input, check)?;
    let text = if args.aform {
        let a_form = fdr_bound_aform_with(&input, check)?;
        let max_term_rel_diff = rho_form
            .terms
            .iter()
            .zip(&a_form.terms)
            .map(|(x, y)| rel(*x, *y))
            .fold(0.0, f64::max);
        match args.format {
            Format::Json => json(&BothForms {
                rho_form,
                a_form,
                max_term_rel_diff,
            }),
            Format::Text => {
                let mut s = String::new();
                table(&rho_form, &mut s);
                table(&a_form, &mut s);
                let _ = writeln!(s, "max termwise relative difference {max_term_rel_diff:e}");
                s
            }
        }
    } else {
        match args.format {
            Format::Json => json(&rho_form),
            Format::Text => {
                let mut s = String::new();
                table(&rho_form, &mut s);
                s
            }
        }
    };
    write_all(None, text.as_bytes())
}
