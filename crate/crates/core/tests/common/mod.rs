#![allow(dead_code)]

use probsym::procsim::{Coefficient, DiffChar, JumpSize, LevyTriplet, ProcessSpec, StateJump};

pub fn mean_reverting() -> DiffChar {
    DiffChar {
        drift: Coefficient::Polynomial { poly: vec![0.0, -1.0] },
        diffusion: Coefficient::Constant(1.0),
        jumps: vec![],
    }
}

/// Constant triplets covering drift, diffusion, and every jump law.
pub fn triplet_battery() -> Vec<LevyTriplet> {
    let mut mixed = LevyTriplet::brownian(0.7);
    mixed.drift = -0.3;
    mixed.jumps = vec![
        probsym::procsim::JumpComponent {
            rate: 0.5,
            size: JumpSize::Uniform { low: -1.5, high: 0.5 },
        },
        probsym::procsim::JumpComponent {
            rate: 2.0,
            size: JumpSize::TwoPoint {
                a: 0.3,
                b: -2.0,
                p: 0.25,
            },
        },
    ];
    vec![
        LevyTriplet::default(),
        LevyTriplet::drift(1.0),
        LevyTriplet::brownian(1.0),
        LevyTriplet::compound_poisson(1.0, JumpSize::Constant(2.0)),
        LevyTriplet::compound_poisson(3.0, JumpSize::Constant(0.4)),
        mixed,
    ]
}

/// State-dependent characteristics with continuous coefficients.
pub fn char_battery() -> Vec<DiffChar> {
    vec![
        mean_reverting(),
        DiffChar {
            drift: Coefficient::Polynomial {
                poly: vec![0.5, 0.0, -0.2],
            },
            diffusion: Coefficient::Polynomial {
                poly: vec![1.0, 0.0, 0.5],
            },
            jumps: vec![StateJump {
                rate: Coefficient::Polynomial {
                    poly: vec![1.0, 0.0, 0.1],
                },
                size: JumpSize::Uniform { low: -0.5, high: 1.5 },
            }],
        },
    ]
}

/// Stochastic specs used for Monte Carlo properties.
pub fn mc_battery() -> Vec<ProcessSpec> {
    let mut specs: Vec<ProcessSpec> = triplet_battery().into_iter().map(ProcessSpec::Levy).collect();
    specs.extend(char_battery().into_iter().map(ProcessSpec::LevyType));
    specs
}
