//! Named benchmark settings.
//!
//! The table presets are the three published comparison tables; the scaling
//! presets sweep series length and grid size for the cost figures; the
//! refine preset puts a coarse grid against its refined output.

use dcdp::data::ModelFamily;
use dcdp::simulate::SimConfig;

pub struct Preset {
    pub name: &'static str,
    pub about: &'static str,
    pub kind: PresetKind,
}

pub enum PresetKind {
    /// Repeated simulate-detect trials at one table setting.
    Table(TableSetting),
    /// Divide wall time over n in {1000, 2000, 4000, 8000} at Q = 100.
    ScalingN,
    /// Divide wall time over Q in {25, 50, 100, 200} at n = 8000.
    ScalingQ,
    /// Coarse-grid trials where the refinement has room to move points.
    RefineBenefit,
}

pub struct TableSetting {
    pub family: ModelFamily,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub delta: f64,
    pub delta_diag: f64,
    pub delta_off: f64,
}

impl TableSetting {
    pub fn sim(&self) -> SimConfig {
        let mut sim = SimConfig::new(self.family, self.n, self.p, self.k);
        sim.delta = self.delta;
        sim.delta_diag = self.delta_diag;
        sim.delta_off = self.delta_off;
        sim
    }
}

const fn table(family: ModelFamily, n: usize, p: usize, delta: f64, delta_diag: f64) -> PresetKind {
    PresetKind::Table(TableSetting {
        family,
        n,
        p,
        k: 3,
        delta,
        delta_diag,
        delta_off: 0.3,
    })
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "mean-n200-p20-d5",
        about: "mean shift, n=200 p=20 K=3 delta=5",
        kind: table(ModelFamily::Mean, 200, 20, 5.0, 5.0),
    },
    Preset {
        name: "mean-n200-p20-d1",
        about: "mean shift, n=200 p=20 K=3 delta=1",
        kind: table(ModelFamily::Mean, 200, 20, 1.0, 5.0),
    },
    Preset {
        name: "mean-n200-p20-d05",
        about: "mean shift, n=200 p=20 K=3 delta=0.5",
        kind: table(ModelFamily::Mean, 200, 20, 0.5, 5.0),
    },
    Preset {
        name: "mean-n200-p100-d5",
        about: "mean shift, n=200 p=100 K=3 delta=5",
        kind: table(ModelFamily::Mean, 200, 100, 5.0, 5.0),
    },
    Preset {
        name: "mean-n200-p100-d1",
        about: "mean shift, n=200 p=100 K=3 delta=1",
        kind: table(ModelFamily::Mean, 200, 100, 1.0, 5.0),
    },
    Preset {
        name: "mean-n800-p100-d05",
        about: "mean shift, n=800 p=100 K=3 delta=0.5",
        kind: table(ModelFamily::Mean, 800, 100, 0.5, 5.0),
    },
    Preset {
        name: "regression-n200-p20-d5",
        about: "linear regression, n=200 p=20 K=3 delta=5",
        kind: table(ModelFamily::Regression, 200, 20, 5.0, 5.0),
    },
    Preset {
        name: "regression-n200-p20-d1",
        about: "linear regression, n=200 p=20 K=3 delta=1",
        kind: table(ModelFamily::Regression, 200, 20, 1.0, 5.0),
    },
    Preset {
        name: "regression-n200-p100-d5",
        about: "linear regression, n=200 p=100 K=3 delta=5",
        kind: table(ModelFamily::Regression, 200, 100, 5.0, 5.0),
    },
    Preset {
        name: "regression-n200-p100-d1",
        about: "linear regression, n=200 p=100 K=3 delta=1",
        kind: table(ModelFamily::Regression, 200, 100, 1.0, 5.0),
    },
    Preset {
        name: "graphical-n2000-p5-d2",
        about: "precision shift, n=2000 p=5 K=3 diag=2 off=0.3",
        kind: table(ModelFamily::Graphical, 2000, 5, 5.0, 2.0),
    },
    Preset {
        name: "graphical-n2000-p10-d5",
        about: "precision shift, n=2000 p=10 K=3 diag=5 off=0.3",
        kind: table(ModelFamily::Graphical, 2000, 10, 5.0, 5.0),
    },
    Preset {
        name: "graphical-n2000-p20-d5",
        about: "precision shift, n=2000 p=20 K=3 diag=5 off=0.3",
        kind: table(ModelFamily::Graphical, 2000, 20, 5.0, 5.0),
    },
    Preset {
        name: "graphical-n400-p10-d5",
        about: "precision shift, n=400 p=10 K=3 diag=5 off=0.3",
        kind: table(ModelFamily::Graphical, 400, 10, 5.0, 5.0),
    },
    Preset {
        name: "graphical-n400-p20-d5",
        about: "precision shift, n=400 p=20 K=3 diag=5 off=0.3",
        kind: table(ModelFamily::Graphical, 400, 20, 5.0, 5.0),
    },
    Preset {
        name: "scaling-n",
        about: "divide wall time vs series length at fixed grid size",
        kind: PresetKind::ScalingN,
    },
    Preset {
        name: "scaling-q",
        about: "divide wall time vs grid size at fixed series length",
        kind: PresetKind::ScalingQ,
    },
    Preset {
        name: "refine-benefit",
        about: "coarse grid trials, divide error vs refined error",
        kind: PresetKind::RefineBenefit,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn listing() -> String {
    PRESETS
        .iter()
        .map(|p| format!("{} ({})", p.name, p.about))
        .collect::<Vec<_>>()
        .join("; ")
}
