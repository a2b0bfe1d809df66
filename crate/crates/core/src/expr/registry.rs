//! Function registry: arity, class, special-function groups, derivative
//! templates and table antiderivatives. The shipped table lives in
//! `registry.txt`; any other table in the same format can be loaded.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::prefix::parse_prefix_with;
use super::{Expr, ExprError, Node, Symbol};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnClass {
    Trig,
    ExpLog,
    Algebraic,
    Special,
}

impl FnClass {
    fn parse(s: &str) -> Option<FnClass> {
        Some(match s {
            "trig" => FnClass::Trig,
            "explog" => FnClass::ExpLog,
            "algebraic" => FnClass::Algebraic,
            "special" => FnClass::Special,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FunctionSpec {
    pub name: Symbol,
    pub arity: usize,
    pub class: FnClass,
    /// Special-function groups this function belongs to (empty when elementary).
    pub groups: Vec<String>,
    /// `derivatives[k]` is the partial derivative with respect to argument `k`.
    pub derivatives: Vec<Option<Expr>>,
    pub antiderivative: Option<Expr>,
}

#[derive(Debug, Clone)]
pub struct FunctionRegistry {
    specs: Vec<FunctionSpec>,
    index: BTreeMap<Symbol, usize>,
    groups: Vec<(String, String)>,
}

const STANDARD_TABLE: &str = include_str!("registry.txt");

/// Placeholder variable for argument `k` in templates.
pub fn placeholder(k: usize) -> String {
    format!("_{k}")
}

impl FunctionRegistry {
    /// The shipped registry. Parsed once.
    pub fn standard() -> &'static FunctionRegistry {
        static REG: OnceLock<FunctionRegistry> = OnceLock::new();
        REG.get_or_init(|| {
            FunctionRegistry::from_text(STANDARD_TABLE).expect("shipped registry is valid")
        })
    }

    pub fn from_text(text: &str) -> Result<FunctionRegistry, ExprError> {
        let bad = |line: usize, msg: &str| ExprError::Registry(format!("line {}: {msg}", line + 1));
        let mut reg = FunctionRegistry {
            specs: Vec::new(),
            index: BTreeMap::new(),
            groups: Vec::new(),
        };
        // First pass: names, arities, classes, groups. Templates need the full name table.
        let mut pending: Vec<(usize, Vec<String>)> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("group ") {
                let mut it = rest.trim().splitn(2, ' ');
                let id = it.next().unwrap_or("").trim().to_string();
                let display = it.next().unwrap_or("").trim().to_string();
                if id.is_empty() || reg.groups.iter().any(|(g, _)| *g == id) {
                    return Err(bad(ln, "empty or duplicate group id"));
                }
                reg.groups.push((id, display));
                continue;
            }
            let Some(rest) = line.strip_prefix("fn ") else {
                return Err(bad(ln, "expected `group` or `fn`"));
            };
            let cols: Vec<String> = rest.split('|').map(|c| c.trim().to_string()).collect();
            if cols.len() != 7 {
                return Err(bad(ln, "fn line needs 7 columns"));
            }
            let name: Symbol = cols[0].as_str().into();
            let arity: usize = cols[1].parse().map_err(|_| bad(ln, "bad arity"))?;
            if !(1..=2).contains(&arity) {
                return Err(bad(ln, "arity must be 1 or 2"));
            }
            let class = FnClass::parse(&cols[2]).ok_or_else(|| bad(ln, "unknown class"))?;
            let groups: Vec<String> = if cols[3] == "-" {
                Vec::new()
            } else {
                cols[3].split(',').map(|g| g.trim().to_string()).collect()
            };
            for g in &groups {
                if !reg.groups.iter().any(|(id, _)| id == g) {
                    return Err(bad(ln, &format!("undeclared group `{g}`")));
                }
            }
            if (class == FnClass::Special) == groups.is_empty() {
                return Err(bad(ln, "special functions need a group, elementary ones none"));
            }
            if reg.index.contains_key(&name) {
                return Err(bad(ln, &format!("duplicate function `{name}`")));
            }
            reg.index.insert(name.clone(), reg.specs.len());
            reg.specs.push(FunctionSpec {
                name,
                arity,
                class,
                groups,
                derivatives: Vec::new(),
                antiderivative: None,
            });
            pending.push((ln, cols));
        }
        // Second pass: templates.
        let mut parsed = Vec::with_capacity(pending.len());
        for (ln, cols) in &pending {
            let arity: usize = cols[1].parse().unwrap();
            let mut derivs = Vec::with_capacity(arity);
            for k in 0..arity {
                derivs.push(reg.parse_template(&cols[4 + k], arity).map_err(|e| bad(*ln, &e))?);
            }
            if arity == 1 && cols[5] != "-" {
                return Err(bad(*ln, "unary function with a second derivative column"));
            }
            let anti = reg.parse_template(&cols[6], arity).map_err(|e| bad(*ln, &e))?;
            if anti.is_some() && arity != 1 {
                return Err(bad(*ln, "antiderivatives are only supported for unary functions"));
            }
            parsed.push((derivs, anti));
        }
        for (spec, (derivs, anti)) in reg.specs.iter_mut().zip(parsed) {
            spec.derivatives = derivs;
            spec.antiderivative = anti;
        }
        Ok(reg)
    }

    fn parse_template(&self, text: &str, arity: usize) -> Result<Option<Expr>, String> {
        if text == "-" {
            return Ok(None);
        }
        let e = parse_prefix_with(text, self).map_err(|e| format!("template `{text}`: {e}"))?;
        let mut err = None;
        e.visit(&mut |n| match n.node() {
            Node::Var(v) => {
                let ok = (0..arity).any(|k| **v == *placeholder(k));
                if !ok {
                    err = Some(format!("template `{text}` references `{v}`"));
                }
            }
            Node::Apply(f, _) if !self.index.contains_key(f) => {
                err = Some(format!("template `{text}` uses unregistered `{f}`"));
            }
            _ => {}
        });
        match err {
            Some(e) => Err(e),
            None => Ok(Some(e)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&FunctionSpec> {
        self.index.get(name).map(|&i| &self.specs[i])
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.get(name).map(|s| s.arity)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn specs(&self) -> &[FunctionSpec] {
        &self.specs
    }

    pub fn class_of(&self, name: &str) -> Option<FnClass> {
        self.get(name).map(|s| s.class)
    }

    pub fn is_special(&self, name: &str) -> bool {
        self.class_of(name) == Some(FnClass::Special)
    }

    /// Group ids with their display names, in declaration order.
    pub fn groups(&self) -> &[(String, String)] {
        &self.groups
    }

    pub fn group_members(&self, group: &str) -> Vec<&FunctionSpec> {
        self.specs
            .iter()
            .filter(|s| s.groups.iter().any(|g| g == group))
            .collect()
    }

    /// Arity-checked application.
    pub fn apply(&self, name: &str, args: Vec<Expr>) -> Result<Expr, ExprError> {
        let spec = self
            .get(name)
            .ok_or_else(|| ExprError::UnknownSymbol(name.to_string()))?;
        if spec.arity != args.len() {
            return Err(ExprError::Arity {
                name: name.to_string(),
                expected: spec.arity,
                got: args.len(),
            });
        }
        Ok(Expr::apply(name, args))
    }
}

/// Substitutes the placeholders of `template` with `args`.
pub fn instantiate(template: &Expr, args: &[Expr]) -> Expr {
    match template.node() {
        Node::Var(v) => {
            for (k, a) in args.iter().enumerate() {
                if **v == *placeholder(k) {
                    return a.clone();
                }
            }
            template.clone()
        }
        _ if template.is_leaf() => template.clone(),
        _ => template.with_children(
            template
                .children()
                .iter()
                .map(|c| instantiate(c, args))
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_table_loads() {
        let reg = FunctionRegistry::standard();
        assert_eq!(reg.arity("sin"), Some(1));
        assert_eq!(reg.arity("BesselJ"), Some(2));
        assert!(reg.is_special("erf"));
        assert!(!reg.is_special("exp"));
        let errs: Vec<_> = reg.group_members("error").iter().map(|s| s.name.to_string()).collect();
        assert!(errs.contains(&"erf".to_string()));
        assert!(reg.group_members("piecewise").is_empty());
    }

    #[test]
    fn every_special_has_a_derivative_rule() {
        let reg = FunctionRegistry::standard();
        for s in reg.specs() {
            assert!(
                s.derivatives.iter().any(Option::is_some),
                "{} has no derivative rule",
                s.name
            );
        }
    }

    #[test]
    fn rejects_unregistered_reference() {
        let text = "fn f | 1 | trig | - | g _0 | - | -\n";
        assert!(FunctionRegistry::from_text(text).is_err());
    }

    #[test]
    fn rejects_stray_variable_in_template() {
        let text = "fn f | 1 | trig | - | * y _0 | - | -\n";
        assert!(FunctionRegistry::from_text(text).is_err());
    }

    #[test]
    fn rejects_duplicates() {
        let text = "fn f | 1 | trig | - | f _0 | - | -\nfn f | 1 | trig | - | f _0 | - | -\n";
        assert!(FunctionRegistry::from_text(text).is_err());
    }
}
