//! Configuration files for the paper's figures and table, compiled in.

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal, $description:literal) => {
        Preset {
            name: $name,
            description: $description,
            text: include_str!(concat!("../presets/", $name, ".toml")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("atm-small", "ATM K=3, b=4 against the exact oracle"),
    preset!("atm-figure1", "ATM K=20, b=10, reverse SMC with 8000 particles (Figure 1, left)"),
    preset!("atm-splitting-figure1", "ATM K=20, b=10, splitting with 10000 particles (Figure 1, right)"),
    preset!("atm-figure2", "ATM K=20, b=30, reverse SMC with 10000 particles (Figure 2)"),
    preset!("hyperbolic-crossval", "non-rare corridor (-3,3) for checking against forward Monte Carlo"),
    preset!("hyperbolic-figure3", "corridor (-1,1) to (5,5.1), t=2, reverse SMC (Figure 3)"),
    preset!("hyperbolic-splitting-figure3", "corridor (-1,1) to (5,5.1), t=2, splitting (Figure 3)"),
    preset!("hyperbolic-figure5", "t=10 sweep over terminal intervals (Figure 5)"),
    preset!("sis-figure4-10x10", "SIS source inference on a 10x10 grid (Figure 4, Table 1)"),
    preset!("sis-figure4-20x20", "SIS source inference on a 20x20 grid (Figure 4, Table 1)"),
    preset!("sis-figure4-30x30", "SIS source inference on a 30x30 grid (Figure 4, Table 1)"),
    preset!("sis-figure4-100x100", "SIS source inference on a 100x100 grid (Figure 4)"),
    preset!("sis-surface", "one representative likelihood surface on a 10x10 grid"),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
