use gbh_core::verify::{
    run_integrals, run_lemma_loo, run_lemma_rejections, run_m_bound, run_mvt, INTEGRAL_A_GRID, RHO_GRID, X0_GRID,
};
use gbh_core::VerifyReport;
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::output::{json, write_all};
use crate::{SectionArg, VerifyArgs};

#[derive(Serialize)]
struct Output {
    seed: u64,
    replications: usize,
    passed: bool,
    reports: Vec<VerifyReport>,
}

fn reports(args: &VerifyArgs) -> CliResult<Vec<VerifyReport>> {
    let want = |s: SectionArg| args.section == s || args.section == SectionArg::All;
    let mut out = Vec::new();
    if want(SectionArg::Integrals) {
        out.push(run_integrals(&INTEGRAL_A_GRID)?);
    }
    if want(SectionArg::MBound) {
        out.push(run_m_bound(&RHO_GRID, &X0_GRID)?);
    }
    if want(SectionArg::Mvt) {
        out.push(run_mvt(&RHO_GRID, &X0_GRID));
    }
    if want(SectionArg::Lemmas) {
        out.push(run_lemma_rejections(args.seed, args.replications)?);
        out.push(run_lemma_loo(args.seed, args.replications)?);
    }
    Ok(out)
}

fn summary_table(reports: &[VerifyReport]) -> String {
    let mut s = format!(
        "{:<26} {:>5} {:>10} {:>14} {:>9}\n",
        "section", "rows", "violations", "max_violation", "asserted"
    );
    for r in reports {
        let name = serde_json::to_value(r.section).expect("section serializes");
        let passed = r.asserted.iter().filter(|c| c.passed).count();
        s.push_str(&format!(
            "{:<26} {:>5} {:>10} {:>14.6e} {:>9}\n",
            name.as_str().unwrap_or_default(),
            r.observed.len(),
            r.violations(),
            r.max_violation,
            format!("{passed}/{}", r.asserted.len())
        ));
        for c in r.asserted.iter().filter(|c| !c.passed) {
            s.push_str(&format!(
                "  FAILED {}: worst {:e} > {:e}\n",
                c.name, c.worst, c.tolerance
            ));
        }
    }
    s
}

pub fn run(args: &VerifyArgs) -> CliResult<()> {
    if args.replications < 2 {
        return Err(CliError::Input("--replications must be at least 2".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Input(format!("cannot start thread pool: {e}")))?;
    let reports = pool.install(|| reports(args))?;
    let failed: usize = reports
        .iter()
        .map(|r| r.asserted.iter().filter(|c| !c.passed).count())
        .sum();
    eprint!("{}", summary_table(&reports));
    let output = Output {
        seed: args.seed,
        replications: args.replications,
        passed: failed == 0,
        reports,
    };
    write_all(args.out.as_deref(), json(&output).as_bytes())?;
    if failed > 0 {
        return Err(CliError::Verification(failed));
    }
    Ok(())
}
