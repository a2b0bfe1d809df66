use num::ToPrimitive;

use super::special::eval_function;
use super::{constant_value, BinOp, Expr, ExprError, Node, Symbol};

/// Variable bindings for numeric evaluation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Env {
    vars: Vec<(Symbol, f64)>,
}

impl Env {
    pub fn new() -> Env {
        Env::default()
    }

    /// Binds only the integration variable.
    pub fn x(value: f64) -> Env {
        Env::new().with(super::X, value)
    }

    pub fn with(mut self, name: &str, value: f64) -> Env {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        match self.vars.iter_mut().find(|(n, _)| &**n == name) {
            Some(slot) => slot.1 = value,
            None => self.vars.push((name.into(), value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.vars.iter().find(|(n, _)| &**n == name).map(|(_, v)| *v)
    }
}

/// IEEE double evaluation. Domain errors give NaN; missing bindings or kernels
/// are errors.
pub fn eval_numeric(e: &Expr, env: &Env) -> Result<f64, ExprError> {
    Ok(match e.node() {
        Node::Int(n) => n.to_f64().unwrap_or(f64::NAN),
        Node::Rational(q) => q.to_f64().unwrap_or(f64::NAN),
        Node::Var(s) => env
            .get(s)
            .ok_or_else(|| ExprError::UnboundVariable(s.to_string()))?,
        Node::Const(s) => {
            constant_value(s).ok_or_else(|| ExprError::UnboundVariable(s.to_string()))?
        }
        Node::Binary(op, [a, b]) => {
            let x = eval_numeric(a, env)?;
            let y = eval_numeric(b, env)?;
            match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => x / y,
                BinOp::Pow => pow(x, y),
            }
        }
        Node::Apply(name, args) => {
            let vals = args
                .iter()
                .map(|a| eval_numeric(a, env))
                .collect::<Result<Vec<_>, _>>()?;
            eval_function(name, &vals).ok_or_else(|| ExprError::NoNumericKernel(name.to_string()))?
        }
    })
}

fn pow(x: f64, y: f64) -> f64 {
    if y.fract() == 0.0 && y.abs() <= 64.0 {
        x.powi(y as i32)
    } else {
        x.powf(y)
    }
}
