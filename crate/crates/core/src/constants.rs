//! Physical constants (SI), kept in one table so that library code, tests,
//! and the serialized docs copy can never drift apart.

/// Newtonian gravitational constant, m³/(kg·s²).
pub const G: f64 = 6.674e-11;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054571817e-34;
/// Speed of light in vacuum, m/s.
pub const C: f64 = 2.99792458e8;
/// Vacuum permeability, N/A².
pub const MU0: f64 = 1.25663706e-6;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.8541878e-12;
/// Boltzmann constant, J/K.
pub const KB: f64 = 1.380649e-23;
/// Standard gravitational acceleration, m/s² (levitation estimates).
pub const G_ACC: f64 = 9.81;
/// Impedance of free space, Ω (shield transmission model).
pub const Z0: f64 = 377.0;
/// Elementary charge, C (charged-particle decoherence-rate estimates).
pub const E_CHARGE: f64 = 1.602176634e-19;

/// The constants table serialized as JSON, for the docs reproduction guide.
/// A golden test pins `docs/constants.json` to this exact string.
pub fn constants_json() -> String {
    let entries = [
        ("G", G, "m^3 kg^-1 s^-2", "Newtonian gravitational constant"),
        ("hbar", HBAR, "J s", "reduced Planck constant"),
        ("c", C, "m s^-1", "speed of light in vacuum"),
        ("mu0", MU0, "N A^-2", "vacuum permeability"),
        ("eps0", EPS0, "F m^-1", "vacuum permittivity"),
        ("k_B", KB, "J K^-1", "Boltzmann constant"),
        ("g", G_ACC, "m s^-2", "standard gravitational acceleration"),
        ("Z0", Z0, "ohm", "impedance of free space"),
        ("e", E_CHARGE, "C", "elementary charge"),
    ];
    let mut out = String::from("{\n");
    for (i, (name, value, unit, what)) in entries.iter().enumerate() {
        out.push_str(&format!(
            "  \"{name}\": {{ \"value\": {value:e}, \"unit\": \"{unit}\", \"description\": \"{what}\" }}{}\n",
            if i + 1 < entries.len() { "," } else { "" }
        ));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_json_parses_and_round_trips_values() {
        // serde_json's default float parser may be off in the last ULP, which
        // is irrelevant for the audit copy; compare at 1e-15 relative.
        let close = |a: f64, b: f64| ((a - b) / b).abs() < 1e-15;
        let parsed: serde_json::Value = serde_json::from_str(&constants_json()).unwrap();
        assert!(close(parsed["hbar"]["value"].as_f64().unwrap(), HBAR));
        assert!(close(parsed["G"]["value"].as_f64().unwrap(), G));
        assert!(close(parsed["k_B"]["value"].as_f64().unwrap(), KB));
        assert!(close(parsed["e"]["value"].as_f64().unwrap(), E_CHARGE));
        assert_eq!(parsed.as_object().unwrap().len(), 9);
    }

    #[test]
    fn hbar_c_product_used_by_casimir_prefactor() {
        // ħc enters the sphere–plate Casimir coefficient; pin the product so a
        // typo in either constant is caught by an independent digit check.
        assert!((HBAR * C - 3.161526771559562e-26).abs() < 1e-38);
    }
}
