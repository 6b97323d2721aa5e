//! Built-in model files reproducing the worked examples.

/// What `reproduce` does with a preset's model file.
#[derive(Debug, Clone, Copy)]
pub enum Action {
    Simulate,
    /// Fixed-shape sweep; the largest shape is the reference.
    Sweep(&'static str),
    /// One adaptive run per starting shape.
    Starts(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub about: &'static str,
    pub model: &'static str,
    pub action: Action,
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "exampleA",
        about: "number Hamiltonian + photon loss; the bound is exactly zero",
        model: include_str!("../presets/exampleA.toml"),
        action: Action::Simulate,
    },
    Preset {
        name: "exampleB",
        about: "drive sin(t)(a + ad), Euler steps with the space-time certificate",
        model: include_str!("../presets/exampleB.toml"),
        action: Action::Simulate,
    },
    Preset {
        name: "exampleC",
        about: "cat qubit, sweep N = 4..30 against N = 40",
        model: include_str!("../presets/exampleC.toml"),
        action: Action::Sweep("4..30,40"),
    },
    Preset {
        name: "exampleD",
        about: "squeezed cat r = 5/4, sweep N = 4..30 against N = 40",
        model: include_str!("../presets/exampleD.toml"),
        action: Action::Sweep("4..30,40"),
    },
    Preset {
        name: "exampleE",
        about: "cat + buffer, sweep (8,4)..(28,15) against (40,20)",
        model: include_str!("../presets/exampleE.toml"),
        action: Action::Sweep("8x4,10x5,12x6,13x7,15x8,17x9,19x10,21x11,23x12,24x13,26x14,28x15,40x20"),
    },
    Preset {
        name: "gkp",
        about: "modular GKP dissipation, fixed-step RK4 up to T = 2/(eps eta)",
        model: include_str!("../presets/gkp.toml"),
        action: Action::Sweep("20,30,40,60"),
    },
    Preset {
        name: "adaptive1d",
        about: "space-adaptive cat qubit started at N = 15 and N = 55",
        model: include_str!("../presets/adaptive1d.toml"),
        action: Action::Starts(&["15", "55"]),
    },
    Preset {
        name: "adaptive2d",
        about: "space-adaptive cat + buffer on k_a/2 + k_b <= cap, drive off at t = 1.5",
        model: include_str!("../presets/adaptive2d.toml"),
        action: Action::Simulate,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}
