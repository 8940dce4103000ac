mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use opforge::selftest::Fault;

/// Exact rational certificates for dg operads, bar/cobar constructions and
/// Chevalley–Eilenberg algebras.
#[derive(Parser, Debug)]
#[command(name = "opforge", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Input file (JSON) or a builtin name: sl2, heisenberg3, abelian:N
    #[arg(long, global = true)]
    pub input: Option<String>,

    #[arg(long, global = true, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_arity: u64,

    #[arg(long, global = true, default_value_t = 6, value_parser = clap::value_parser!(u64).range(1..))]
    pub max_weight: u64,

    /// Degree window LO:HI for reported dimensions and homology
    #[arg(long, global = true, value_parser = parse_window, allow_hyphen_values = true)]
    pub degrees: Option<(i64, i64)>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Worker threads (0 = one per core)
    #[arg(long, global = true, env = "OPFORGE_JOBS", default_value_t = 0)]
    pub jobs: usize,

    /// Plant a fault: kappa-sign-flip, cone-sign or tensor-sign
    #[arg(long, global = true)]
    pub debug_inject: Option<Fault>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Homology of a chain complex
    Homology,
    /// Maurer–Cartan residuals of a twisting morphism
    McCheck {
        #[arg(long, value_enum, default_value_t = Morphism::Kappa)]
        morphism: Morphism,
    },
    /// The three acyclicity criteria for a twisting morphism
    KoszulCheck {
        #[arg(long, value_enum, default_value_t = Morphism::Kappa)]
        morphism: Morphism,
    },
    /// Bar construction of a Lie algebra relative to κ
    Bar,
    /// Cobar construction of the bar construction of a Lie algebra
    Cobar,
    /// Chevalley–Eilenberg cochain algebra and its cohomology
    Ce,
    /// Cotangent fiber, tangent complex and the unit comparison
    TangentRoundtrip,
    /// Run the acceptance suite
    Selftest,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Morphism {
    /// 𝔖^c ⊗_H coComm^nu → Lie
    Kappa,
    /// ℚ ⊕ sV → T(V), with V from --input (default ℚ)
    FreeCofree,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Text,
}

fn parse_window(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: i64 = a
        .trim()
        .parse()
        .map_err(|_| format!("bad lower bound '{a}'"))?;
    let hi: i64 = b
        .trim()
        .parse()
        .map_err(|_| format!("bad upper bound '{b}'"))?;
    if lo > hi {
        return Err(format!("empty window {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
        {
            eprintln!("warning: {e}");
        }
    }
    let outcome = commands::run(&cli);
    match cli.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&outcome.json).expect("serializable")
        ),
        Format::Text => {
            if outcome.code == 2 {
                eprint!("{}", outcome.text);
            } else {
                print!("{}", outcome.text);
            }
        }
    }
    ExitCode::from(outcome.code)
}
