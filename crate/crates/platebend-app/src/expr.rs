//! Arithmetic expressions over `x1`, `x2` and `t`.
//!
//! Integer literals are read as floats, so `1/2` is `0.5`. Besides the
//! operators of `evalexpr` the functions `sin cos tan asin acos atan atan2 exp
//! ln sqrt cbrt abs pow` and the constants `pi` and `e` are available.

use std::cell::RefCell;

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables, DefaultNumericTypes, Function, HashMapContext,
    Node, Value,
};
use nalgebra::{Matrix2, Vector3};
use platebend::mesh::Vec2;

const VARIABLES: [&str; 5] = ["x1", "x2", "t", "pi", "e"];

pub struct Expr {
    source: String,
    node: Node<DefaultNumericTypes>,
    context: RefCell<HashMapContext<DefaultNumericTypes>>,
}

impl std::fmt::Debug for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Expr({:?})", self.source)
    }
}

fn float_literals(src: &str) -> String {
    let mut out = String::with_capacity(src.len() + 8);
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        let numeric = word.starts_with(|c: char| c.is_ascii_digit()) && word.chars().all(|c| c.is_ascii_digit());
        out.push_str(word);
        if numeric {
            out.push_str(".0");
        }
        word.clear();
    };
    for ch in src.chars() {
        let exponent_sign = (ch == '-' || ch == '+')
            && word.len() > 1
            && word.ends_with(['e', 'E'])
            && word[..word.len() - 1].chars().all(|c| c.is_ascii_digit() || c == '.');
        if ch.is_ascii_alphanumeric() || ch == '_' || ch == '.' || ch == ':' || exponent_sign {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            out.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn unary(f: fn(f64) -> f64) -> Function<DefaultNumericTypes> {
    Function::new(move |v: &Value<DefaultNumericTypes>| Ok(Value::Float(f(v.as_number()?))))
}

fn binary(f: fn(f64, f64) -> f64) -> Function<DefaultNumericTypes> {
    Function::new(move |v: &Value<DefaultNumericTypes>| {
        let args = v.as_fixed_len_tuple(2)?;
        Ok(Value::Float(f(args[0].as_number()?, args[1].as_number()?)))
    })
}

fn base_context() -> HashMapContext<DefaultNumericTypes> {
    let mut ctx = HashMapContext::new();
    let unaries: [(&str, fn(f64) -> f64); 11] = [
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("tan", f64::tan),
        ("asin", f64::asin),
        ("acos", f64::acos),
        ("atan", f64::atan),
        ("exp", f64::exp),
        ("ln", f64::ln),
        ("sqrt", f64::sqrt),
        ("abs", f64::abs),
        ("cbrt", f64::cbrt),
    ];
    for (name, f) in unaries {
        ctx.set_function(name.into(), unary(f)).unwrap();
    }
    ctx.set_function("atan2".into(), binary(f64::atan2)).unwrap();
    ctx.set_function("pow".into(), binary(f64::powf)).unwrap();
    ctx.set_value("pi".into(), Value::Float(std::f64::consts::PI)).unwrap();
    ctx.set_value("e".into(), Value::Float(std::f64::consts::E)).unwrap();
    ctx
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, String> {
        let node = build_operator_tree::<DefaultNumericTypes>(&float_literals(source))
            .map_err(|e| format!("cannot parse `{source}`: {e}"))?;
        if let Some(v) = node.iter_variable_identifiers().find(|v| !VARIABLES.contains(v)) {
            return Err(format!("unknown variable `{v}` in `{source}` (allowed: x1, x2, t, pi, e)"));
        }
        let expr = Expr { source: source.to_string(), node, context: RefCell::new(base_context()) };
        expr.try_eval(Vec2::new(0.1, 0.2), 0.0)?;
        Ok(expr)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn try_eval(&self, x: Vec2, t: f64) -> Result<f64, String> {
        let mut ctx = self.context.borrow_mut();
        for (name, v) in [("x1", x.x), ("x2", x.y), ("t", t)] {
            ctx.set_value(name.into(), Value::Float(v)).unwrap();
        }
        self.node.eval_number_with_context(&*ctx).map_err(|e| format!("cannot evaluate `{}`: {e}", self.source))
    }

    /// Evaluates at a point; evaluation errors other than those caught by
    /// [`Expr::parse`] give `NaN`, which the solvers reject downstream.
    pub fn eval(&self, x: Vec2, t: f64) -> f64 {
        self.try_eval(x, t).unwrap_or(f64::NAN)
    }
}

/// Three expressions forming a vector field.
#[derive(Debug)]
pub struct VecExpr(pub [Expr; 3]);

impl VecExpr {
    pub fn parse(src: &[String; 3]) -> Result<VecExpr, String> {
        Ok(VecExpr([Expr::parse(&src[0])?, Expr::parse(&src[1])?, Expr::parse(&src[2])?]))
    }

    pub fn eval(&self, x: Vec2, t: f64) -> Vector3<f64> {
        Vector3::new(self.0[0].eval(x, t), self.0[1].eval(x, t), self.0[2].eval(x, t))
    }
}

/// A 2x2 matrix field given row by row.
#[derive(Debug)]
pub struct MatExpr(pub [[Expr; 2]; 2]);

impl MatExpr {
    pub fn parse(src: &[[String; 2]; 2]) -> Result<MatExpr, String> {
        let row = |r: &[String; 2]| -> Result<[Expr; 2], String> { Ok([Expr::parse(&r[0])?, Expr::parse(&r[1])?]) };
        Ok(MatExpr([row(&src[0])?, row(&src[1])?]))
    }

    pub fn eval(&self, x: Vec2, t: f64) -> Matrix2<f64> {
        let e = &self.0;
        Matrix2::new(e[0][0].eval(x, t), e[0][1].eval(x, t), e[1][0].eval(x, t), e[1][1].eval(x, t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_literals_are_floats() {
        let e = Expr::parse("1/2 + x1^2").unwrap();
        assert_eq!(e.eval(Vec2::new(3.0, 0.0), 0.0), 9.5);
        assert_eq!(float_literals("x1 + 10*t - 2.5"), "x1 + 10.0*t - 2.5");
        assert!((Expr::parse("2e-3 + 1E+1").unwrap().eval(Vec2::zeros(), 0.0) - 10.002).abs() < 1e-14);
    }

    #[test]
    fn functions_and_constants() {
        let e = Expr::parse("sin(pi * x1) * cos(x2) + atan2(1, 1) - sqrt(t)").unwrap();
        let v = e.eval(Vec2::new(0.5, 0.0), 4.0);
        assert!((v - (1.0 + std::f64::consts::FRAC_PI_4 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(Expr::parse("x3 + 1").unwrap_err().contains("unknown variable `x3`"));
        assert!(Expr::parse("foo(x1)").is_err());
        assert!(Expr::parse("1 +").is_err());
    }
}
