use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde_json::{json, Value};

use opforge::barcobar::{bar, ce_algebra, cobar, CooperadCoalgebra};
use opforge::complexes::{sphere, ChainComplex};
use opforge::opcoop::{builtin_lie, shifted_cocomm, AlgebraKind, OperadAlgebra};
use opforge::selftest::{selftest, Fault};
use opforge::tangent::dk_unit_check;
use opforge::twisting::{free_cofree_twist, kappa, kappa_from, Grading, Twisting};
use opforge::OpError;

use crate::{Cli, Command, Morphism};

pub struct Outcome {
    pub code: u8,
    pub json: Value,
    pub text: String,
}

struct Failure {
    code: u8,
    kind: String,
    message: String,
}

impl Failure {
    fn input(kind: &str, message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            kind: kind.into(),
            message: message.into(),
        }
    }
}

fn kind_of(e: &OpError) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or("Error")
        .to_string()
}

/// Errors in reading or validating the input.
fn input_error(e: OpError) -> Failure {
    Failure::input(&kind_of(&e), e.to_string())
}

/// Errors raised while computing: malformed requests are input errors,
/// everything else is a failed certificate.
fn compute_error(e: OpError) -> Failure {
    let code = match e {
        OpError::Parse { .. }
        | OpError::ShapeMismatch(_)
        | OpError::ArityOverflow { .. }
        | OpError::NotReduced => 2,
        _ => 1,
    };
    Failure {
        code,
        kind: kind_of(&e),
        message: e.to_string(),
    }
}

struct Done {
    pass: bool,
    result: Value,
    text: String,
}

pub fn run(cli: &Cli) -> Outcome {
    let name = command_name(&cli.command);
    let mut header = json!({
        "tool": "opforge",
        "version": env!("CARGO_PKG_VERSION"),
        "command": name,
        "truncation": {"max_arity": cli.max_arity, "max_weight": cli.max_weight},
    });
    if let Some((lo, hi)) = cli.degrees {
        header["degrees"] = json!([lo, hi]);
    }
    if let Some(f) = cli.debug_inject {
        header["debug_inject"] = json!(f.to_string());
    }
    if let Some(i) = &cli.input {
        header["input"] = json!(i);
    }
    let out = match check_fault(cli) {
        Ok(()) => dispatch(cli),
        Err(f) => Err(f),
    };
    match out {
        Ok(done) => {
            header["pass"] = json!(done.pass);
            header["result"] = done.result;
            let verdict = if done.pass { "pass" } else { "FAIL" };
            let text = format!(
                "opforge {} {name} (max arity {}, max weight {})\n{}{verdict}\n",
                env!("CARGO_PKG_VERSION"),
                cli.max_arity,
                cli.max_weight,
                done.text
            );
            Outcome {
                code: if done.pass { 0 } else { 1 },
                json: header,
                text,
            }
        }
        Err(f) => {
            header["pass"] = json!(false);
            header["error"] = json!({"kind": f.kind, "message": f.message});
            Outcome {
                code: f.code,
                text: format!("error[{}]: {}\n", f.kind, f.message),
                json: header,
            }
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Homology => "homology",
        Command::McCheck { .. } => "mc-check",
        Command::KoszulCheck { .. } => "koszul-check",
        Command::Bar => "bar",
        Command::Cobar => "cobar",
        Command::Ce => "ce",
        Command::TangentRoundtrip => "tangent-roundtrip",
        Command::Selftest => "selftest",
    }
}

fn check_fault(cli: &Cli) -> Result<(), Failure> {
    let Some(f) = cli.debug_inject else {
        return Ok(());
    };
    let ok = match cli.command {
        Command::Selftest => true,
        Command::McCheck { morphism } | Command::KoszulCheck { morphism } => {
            f == Fault::KappaSignFlip && morphism == Morphism::Kappa
        }
        Command::Bar | Command::Cobar | Command::Ce => f == Fault::KappaSignFlip,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Failure::input(
            "Usage",
            format!(
                "fault '{f}' does not apply to {}",
                command_name(&cli.command)
            ),
        ))
    }
}

fn dispatch(cli: &Cli) -> Result<Done, Failure> {
    match cli.command {
        Command::Homology => homology(cli),
        Command::McCheck { morphism } => mc_check(cli, morphism),
        Command::KoszulCheck { morphism } => koszul_check(cli, morphism),
        Command::Bar => bar_cmd(cli),
        Command::Cobar => cobar_cmd(cli),
        Command::Ce => ce_cmd(cli),
        Command::TangentRoundtrip => tangent_cmd(cli),
        Command::Selftest => selftest_cmd(cli),
    }
}

// ---------------------------------------------------------------------------
// inputs

fn read_json(path: &Path) -> Result<Value, Failure> {
    let s = std::fs::read_to_string(path)
        .map_err(|e| Failure::input("Io", format!("{}: {e}", path.display())))?;
    serde_json::from_str(&s)
        .map_err(|e| Failure::input("ParseError", format!("{}: {e}", path.display())))
}

fn load_complex(cli: &Cli) -> Result<ChainComplex, Failure> {
    let Some(input) = &cli.input else {
        return Err(Failure::input("Usage", "this command needs --input"));
    };
    let path = Path::new(input);
    if path.exists() {
        return ChainComplex::from_json(&read_json(path)?).map_err(input_error);
    }
    if let Some(g) = builtin_lie(input, 2) {
        return Ok(g.carrier.to_complex());
    }
    Err(Failure::input(
        "Input",
        format!("'{input}' is neither a file nor a builtin"),
    ))
}

fn load_lie(cli: &Cli, max_arity: usize) -> Result<OperadAlgebra, Failure> {
    let Some(input) = &cli.input else {
        return Err(Failure::input(
            "Usage",
            "this command needs --input (a file or sl2, heisenberg3, abelian:N)",
        ));
    };
    let path = Path::new(input);
    if path.exists() {
        return OperadAlgebra::from_json(&read_json(path)?, AlgebraKind::Lie, max_arity)
            .map_err(input_error);
    }
    builtin_lie(input, max_arity).ok_or_else(|| {
        Failure::input(
            "Input",
            format!("'{input}' is neither a file nor a builtin"),
        )
    })
}

fn kappa_for(cli: &Cli, max_arity: usize) -> Twisting {
    if cli.debug_inject == Some(Fault::KappaSignFlip) {
        kappa_from(
            Arc::new(shifted_cocomm(max_arity).with_sign_fault(3)),
            max_arity,
        )
    } else {
        kappa(max_arity)
    }
}

fn windowed(cli: &Cli, m: &BTreeMap<i64, usize>) -> BTreeMap<i64, usize> {
    m.iter()
        .filter(|(n, k)| **k > 0 && cli.degrees.is_none_or(|(lo, hi)| lo <= **n && **n <= hi))
        .map(|(n, k)| (*n, *k))
        .collect()
}

fn table(m: &BTreeMap<i64, usize>) -> String {
    if m.is_empty() {
        return "0".into();
    }
    m.iter()
        .map(|(n, k)| format!("{n}:{k}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn json_map(m: &BTreeMap<i64, usize>) -> Value {
    json!(m
        .iter()
        .map(|(n, k)| (n.to_string(), *k))
        .collect::<BTreeMap<String, usize>>())
}

// ---------------------------------------------------------------------------
// commands

fn homology(cli: &Cli) -> Result<Done, Failure> {
    let x = load_complex(cli)?;
    let dims = windowed(cli, x.dims());
    let h = windowed(cli, &x.homology());
    let chi = x.euler_characteristic();
    let text = format!(
        "dims      {}\nhomology  {}\neuler     {chi}\n",
        table(&dims),
        table(&h)
    );
    Ok(Done {
        pass: true,
        result: json!({"dims": json_map(&dims), "homology": json_map(&h), "euler_characteristic": chi, "d_squared_zero": true}),
        text,
    })
}

fn morphism_for(cli: &Cli, m: Morphism) -> Result<Twisting, Failure> {
    match m {
        Morphism::Kappa => Ok(kappa_for(cli, cli.max_arity as usize)),
        Morphism::FreeCofree => {
            let v = if cli.input.is_some() {
                load_complex(cli)?
            } else {
                sphere(1, 0)
            };
            free_cofree_twist(&v, cli.max_weight as usize).map_err(input_error)
        }
    }
}

fn mc_check(cli: &Cli, m: Morphism) -> Result<Done, Failure> {
    let tw = morphism_for(cli, m)?;
    let r = tw.report();
    let mut text = String::new();
    for (n, k) in r.residual_support.iter().enumerate() {
        let _ = writeln!(
            text,
            "arity {n}: {}",
            if *k == 0 {
                "residual zero".to_string()
            } else {
                format!("{k} nonzero entries")
            }
        );
    }
    for p in &r.problems {
        let _ = writeln!(text, "problem: {p}");
    }
    if let Some(a) = r.first_failure {
        let _ = writeln!(text, "first failure in arity {a}");
    }
    Ok(Done {
        pass: r.is_twisting(),
        result: serde_json::to_value(&r).expect("serializable"),
        text,
    })
}

fn koszul_check(cli: &Cli, m: Morphism) -> Result<Done, Failure> {
    let tw = morphism_for(cli, m)?;
    let grading = match m {
        Morphism::Kappa => Grading::Arity,
        Morphism::FreeCofree => Grading::Weight {
            max_weight: cli.max_weight as usize,
        },
    };
    let rep = tw.koszul_check(grading).map_err(compute_error)?;
    let (r, l, t) = (rep.right(), rep.left(), rep.two_sided());
    let mut text = String::new();
    for p in &rep.pieces {
        let w = p.weight.map_or(String::new(), |w| format!(" weight {w}"));
        let _ = writeln!(
            text,
            "arity {}{w}: right {} left {} two-sided {}",
            p.arity, p.right, p.left, p.two_sided
        );
    }
    for p in &rep.problems {
        let _ = writeln!(text, "problem: {p}");
    }
    let agree = r == l && l == t;
    let _ = writeln!(
        text,
        "verdicts: right {r}, left {l}, two-sided {t} ({})",
        if agree { "agree" } else { "disagree" }
    );
    let mut result = serde_json::to_value(&rep).expect("serializable");
    result["verdicts"] = json!({"right": r, "left": l, "two_sided": t, "agree": agree});
    Ok(Done {
        pass: r && l && t,
        result,
        text,
    })
}

/// Highest weight with a nonzero piece.
fn top_weight(dims: &[usize]) -> usize {
    dims.iter().rposition(|&d| d > 0).unwrap_or(0)
}

fn bar_cmd(cli: &Cli) -> Result<Done, Failure> {
    let w = cli.max_weight as usize;
    let g = load_lie(cli, w.max(cli.max_arity as usize).max(2))?;
    let b = bar(&g, &kappa_for(cli, w.max(2)), w).map_err(compute_error)?;
    let ce = b.ce_view();
    let dims: Vec<usize> = ce.pieces.iter().map(|p| p.dim()).collect();
    let top = top_weight(&dims);
    let h = ce.homology();
    let betti: Vec<usize> = (0..=top as i64)
        .map(|k| h.get(&k).copied().unwrap_or(0))
        .collect();
    let mut text = String::new();
    for (k, p) in b.complex.pieces.iter().enumerate().skip(1) {
        let _ = writeln!(
            text,
            "weight {k}: {}",
            table(&windowed(cli, p.to_complex().dims()))
        );
    }
    let _ = writeln!(text, "homology of ℚ ⊕ B[−1]: {}", table(&windowed(cli, &h)));
    let _ = writeln!(text, "betti {betti:?}");
    let weights: Vec<Value> = b
        .complex
        .pieces
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, p)| json!({"weight": k, "dims": json_map(&windowed(cli, p.to_complex().dims()))}))
        .collect();
    Ok(Done {
        pass: true,
        result: json!({
            "algebra": g.name,
            "weights": weights,
            "homology": json_map(&windowed(cli, &b.total().homology())),
            "ce_view_homology": json_map(&windowed(cli, &h)),
            "betti": betti,
            "euler_characteristic": b.complex.euler_characteristic(),
            "d_squared_zero": true,
        }),
        text,
    })
}

fn ce_cmd(cli: &Cli) -> Result<Done, Failure> {
    let w = cli.max_weight as usize;
    let g = load_lie(cli, w.max(cli.max_arity as usize).max(2))?;
    if cli.debug_inject == Some(Fault::KappaSignFlip) {
        bar(&g, &kappa_for(cli, w.max(2)), w).map_err(compute_error)?;
    }
    let ce = ce_algebra(&g, w).map_err(compute_error)?;
    let a = &ce.algebra;
    let h = a.carrier.homology();
    let lowest = a.carrier.degrees.iter().copied().min().unwrap_or(0);
    let betti: Vec<usize> = (0..=-lowest)
        .map(|k| h.get(&-k).copied().unwrap_or(0))
        .collect();
    let gens = a.quasi_free.as_ref().map_or(0, |q| q.generators.dim());
    let text = format!(
        "dim {} with {gens} generators\ncohomology {}\nbetti {betti:?}\n",
        a.dim(),
        table(&windowed(cli, &h))
    );
    Ok(Done {
        pass: true,
        result: json!({
            "algebra": g.name,
            "dim": a.dim(),
            "generators": gens,
            "homology": json_map(&windowed(cli, &h)),
            "betti": betti,
            "d_squared_zero": true,
            "completion": "finite weight truncation: completed and uncompleted agree",
        }),
        text,
    })
}

fn cobar_cmd(cli: &Cli) -> Result<Done, Failure> {
    let w = cli.max_weight as usize;
    let g = load_lie(cli, w.max(cli.max_arity as usize).max(2))?;
    let tw = kappa_for(cli, w.max(2));
    let b = bar(&g, &tw, w).map_err(compute_error)?;
    let coalg = CooperadCoalgebra::from_bar(&b).map_err(compute_error)?;
    let om = cobar(&coalg, &tw, w).map_err(compute_error)?;
    let total = om.total();
    let h = windowed(cli, &total.homology());
    let mut text = String::new();
    let mut pieces = Vec::new();
    for (e, p) in om.complex.pieces.iter().enumerate() {
        let dims = windowed(cli, p.to_complex().dims());
        let _ = writeln!(text, "filtration {e}: {}", table(&dims));
        pieces.push(json!({"filtration": e, "dims": json_map(&dims)}));
    }
    let _ = writeln!(text, "homology {}", table(&h));
    Ok(Done {
        pass: true,
        result: json!({
            "algebra": g.name,
            "coalgebra_dim": coalg.dim(),
            "pieces": pieces,
            "weight_dims": om.weight_dims(),
            "homology": json_map(&h),
            "d_squared_zero": true,
        }),
        text,
    })
}

fn tangent_cmd(cli: &Cli) -> Result<Done, Failure> {
    let g = load_lie(cli, (cli.max_arity as usize).max(2))?;
    let c = dk_unit_check(&g).map_err(compute_error)?;
    let text = format!(
        "lie algebra {}: {}\ntangent complex: {}\nL_0 matches generators: {}\nunit is a chain map: {}\nunit is an isomorphism: {}\n",
        c.lie_algebra,
        table(&c.lie_dims),
        table(&c.tangent_dims),
        c.cotangent_matches_generators,
        c.chain_map,
        c.unit_iso
    );
    Ok(Done {
        pass: c.unit_iso && c.chain_map && c.cotangent_matches_generators,
        result: serde_json::to_value(&c).expect("serializable"),
        text,
    })
}

fn selftest_cmd(cli: &Cli) -> Result<Done, Failure> {
    let r = selftest(cli.debug_inject);
    let mut text = String::new();
    for c in &r.criteria {
        let _ = writeln!(
            text,
            "{:>2} {} {}: {}",
            c.id,
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    Ok(Done {
        pass: r.all_pass(),
        result: serde_json::to_value(&r).expect("serializable"),
        text,
    })
}
