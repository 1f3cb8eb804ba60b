//! Scenarios shipped with the tool.

use crate::Error;

const BUILTINS: &[(&str, &str)] = &[
    ("torus_example", include_str!("../builtins/torus_example.bsl")),
    ("curled_torus", include_str!("../builtins/curled_torus.bsl")),
    ("s2xs2", include_str!("../builtins/s2xs2.bsl")),
    ("tstar_g", include_str!("../builtins/tstar_g.bsl")),
];

pub fn names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(n, _)| *n).collect()
}

/// Scenario text of a builtin; `s2xs2_example` is accepted for `s2xs2`.
pub fn source(name: &str) -> Result<&'static str, Error> {
    let name = if name == "s2xs2_example" { "s2xs2" } else { name };
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| Error::UnknownBuiltin(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses() {
        for name in names() {
            let s = crate::parse_scenario(source(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(s.name, name);
            assert!(s.collar.is_some() && s.main_action().is_some());
        }
        assert!(matches!(source("nope"), Err(Error::UnknownBuiltin(_))));
    }
}
