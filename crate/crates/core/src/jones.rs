//! Jones calculus over the fixed `{|h>, |v>}` basis.
//!
//! `|h> = (1, 0)` and `|v> = (0, 1)`. Counter-propagation through a
//! reciprocal element is described by the transpose of its forward matrix
//! (see [`backward_of`]); with that rule a fiber of any birefringence closed
//! by a Faraday mirror returns the orthogonal polarization, up to a scalar
//! phase (see [`round_trip`]).

use core::fmt;
use core::ops::Mul;
use core::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance used to accept a fiber matrix as unitary in [`round_trip`].
pub const UNITARITY_TOL: f64 = 1e-9;

/// Tolerance on normalized Stokes coordinates used by [`classify`].
pub const CLASSIFY_TOL: f64 = 1e-9;

/// A Jones vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    pub h: Complex64,
    pub v: Complex64,
}

impl PolarizationState {
    pub const fn new(h: Complex64, v: Complex64) -> Self {
        Self { h, v }
    }

    pub const fn horizontal() -> Self {
        Self::new(ONE, ZERO)
    }

    pub const fn vertical() -> Self {
        Self::new(ZERO, ONE)
    }

    pub fn plus45() -> Self {
        let a = Complex64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(a, a)
    }

    pub fn minus45() -> Self {
        let a = core::f64::consts::FRAC_1_SQRT_2;
        Self::new(Complex64::new(a, 0.0), Complex64::new(-a, 0.0))
    }

    /// `(1, i)/sqrt(2)`.
    pub fn left_circular() -> Self {
        let a = core::f64::consts::FRAC_1_SQRT_2;
        Self::new(Complex64::new(a, 0.0), Complex64::new(0.0, a))
    }

    /// `(1, -i)/sqrt(2)`.
    pub fn right_circular() -> Self {
        let a = core::f64::consts::FRAC_1_SQRT_2;
        Self::new(Complex64::new(a, 0.0), Complex64::new(0.0, -a))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.h.norm_sqr() + self.v.norm_sqr()
    }

    /// Returns the unit-norm state pointing the same way.
    pub fn normalize(&self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::InvalidArgument(
                "cannot normalize a zero or non-finite Jones vector",
            ));
        }
        let inv = 1.0 / libm::sqrt(n2);
        Ok(Self::new(self.h * inv, self.v * inv))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::new(self.h * c, self.v * c)
    }

    /// Hermitian inner product `<self|other>`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.h.conj() * other.h + self.v.conj() * other.v
    }

    /// Amplitude with which a counter-propagating beam `returning` gets back
    /// through an analyzer that passes `self` in the forward direction:
    /// `self^T returning`. This is the overlap that matches the transpose
    /// rule of [`backward_of`].
    pub fn return_overlap(&self, returning: &Self) -> Complex64 {
        self.h * returning.h + self.v * returning.v
    }

    /// Normalized Stokes coordinates `(s1, s2, s3)` on the Poincare sphere.
    ///
    /// `s1 = +1` is horizontal, `s2 = +1` is +45 degrees and `s3 = +1` is
    /// `(1, i)/sqrt(2)`.
    pub fn stokes(&self) -> Result<[f64; 3]> {
        let n2 = self.norm_sqr();
        if !(n2 > 0.0) || !n2.is_finite() {
            return Err(Error::InvalidArgument("zero Jones vector has no polarization"));
        }
        let cross = self.h.conj() * self.v;
        Ok([
            (self.h.norm_sqr() - self.v.norm_sqr()) / n2,
            2.0 * cross.re / n2,
            2.0 * cross.im / n2,
        ])
    }
}

/// A 2x2 complex Jones matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMatrix {
    pub m: [[Complex64; 2]; 2],
}

impl ElementMatrix {
    pub const fn new(m00: Complex64, m01: Complex64, m10: Complex64, m11: Complex64) -> Self {
        Self {
            m: [[m00, m01], [m10, m11]],
        }
    }

    pub fn real(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Self::new(m00.into(), m01.into(), m10.into(), m11.into())
    }

    pub const fn identity() -> Self {
        Self::new(ONE, ZERO, ZERO, ONE)
    }

    pub fn diagonal(a: Complex64, b: Complex64) -> Self {
        Self::new(a, ZERO, ZERO, b)
    }

    pub fn scalar(c: Complex64) -> Self {
        Self::diagonal(c, c)
    }

    /// General element of U(2):
    /// `e^{i g} [[cos t e^{i a}, -sin t e^{-i b}], [sin t e^{i b}, cos t e^{-i a}]]`.
    ///
    /// Its determinant is `e^{2 i g}`.
    pub fn unitary(global: f64, mix: f64, a: f64, b: f64) -> Self {
        let g = Complex64::from_polar(1.0, global);
        let (s, c) = (libm::sin(mix), libm::cos(mix));
        Self::new(
            g * Complex64::from_polar(c, a),
            -g * Complex64::from_polar(s, -b),
            g * Complex64::from_polar(s, b),
            g * Complex64::from_polar(c, -a),
        )
    }

    pub fn apply(&self, s: &PolarizationState) -> PolarizationState {
        PolarizationState::new(
            self.m[0][0] * s.h + self.m[0][1] * s.v,
            self.m[1][0] * s.h + self.m[1][1] * s.v,
        )
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.m[0][0], self.m[1][0], self.m[0][1], self.m[1][1])
    }

    pub fn adjoint(&self) -> Self {
        Self::new(
            self.m[0][0].conj(),
            self.m[1][0].conj(),
            self.m[0][1].conj(),
            self.m[1][1].conj(),
        )
    }

    pub fn det(&self) -> Complex64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let m = &self.m;
        Self::new(m[0][0] * c, m[0][1] * c, m[1][0] * c, m[1][1] * c)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..2 {
            for c in 0..2 {
                worst = worst.max((self.m[r][c] - other.m[r][c]).norm());
            }
        }
        worst
    }

    /// `max |(M^H M - I)_{ij}|`.
    pub fn unitarity_defect(&self) -> f64 {
        (self.adjoint() * *self).max_abs_diff(&Self::identity())
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol
    }

    /// Inverse of a unitary matrix (its adjoint).
    pub fn unitary_inverse(&self) -> Self {
        self.adjoint()
    }
}

impl Mul for ElementMatrix {
    type Output = ElementMatrix;

    fn mul(self, rhs: ElementMatrix) -> ElementMatrix {
        let (a, b) = (&self.m, &rhs.m);
        ElementMatrix::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Mul<PolarizationState> for ElementMatrix {
    type Output = PolarizationState;

    fn mul(self, rhs: PolarizationState) -> PolarizationState {
        self.apply(&rhs)
    }
}

/// The optical elements the simulator knows about. Angles are measured from
/// the horizontal axis, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    /// 45 degree Faraday rotator plus mirror, seen as one round-trip
    /// operator: `[[0, 1], [-1, 0]]`.
    FaradayMirror,
    /// Polarization-insensitive phase shift `e^{i phi} I`.
    PhaseModulator(f64),
    /// Half-wave plate with its fast axis at the given angle.
    HalfWavePlate(f64),
    /// Rotation of the polarization frame by the given angle.
    Rotator(f64),
    /// Ideal linear polarizer transmitting along the given angle.
    LinearPolarizer(f64),
    /// Linear retarder `diag(e^{i d/2}, e^{-i d/2})` with its slow axis
    /// rotated to `axis`.
    Birefringent { retardance: f64, axis: f64 },
}

impl Element {
    pub fn matrix(&self) -> Result<ElementMatrix> {
        let finite = |x: f64| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::InvalidArgument("element parameter must be finite"))
            }
        };
        Ok(match *self {
            Element::FaradayMirror => ElementMatrix::real(0.0, 1.0, -1.0, 0.0),
            Element::PhaseModulator(phi) => ElementMatrix::scalar(Complex64::from_polar(1.0, finite(phi)?)),
            Element::HalfWavePlate(alpha) => {
                let two = 2.0 * finite(alpha)?;
                let (s, c) = (libm::sin(two), libm::cos(two));
                ElementMatrix::real(c, s, s, -c)
            }
            Element::Rotator(alpha) => rotation(finite(alpha)?),
            Element::LinearPolarizer(alpha) => {
                let alpha = finite(alpha)?;
                let (s, c) = (libm::sin(alpha), libm::cos(alpha));
                ElementMatrix::real(c * c, c * s, c * s, s * s)
            }
            Element::Birefringent { retardance, axis } => {
                let half = 0.5 * finite(retardance)?;
                let axis = finite(axis)?;
                let d = ElementMatrix::diagonal(Complex64::from_polar(1.0, half), Complex64::from_polar(1.0, -half));
                rotation(axis) * d * rotation(-axis)
            }
        })
    }
}

fn rotation(alpha: f64) -> ElementMatrix {
    let (s, c) = (libm::sin(alpha), libm::cos(alpha));
    ElementMatrix::real(c, -s, s, c)
}

/// Element names accepted by [`make_element`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    FaradayMirror,
    PhaseModulator,
    HalfWavePlate,
    Rotator,
    LinearPolarizer,
    Birefringent,
}

impl FromStr for ElementKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "faraday_mirror" => ElementKind::FaradayMirror,
            "phase_modulator" => ElementKind::PhaseModulator,
            "half_wave_plate" => ElementKind::HalfWavePlate,
            "rotator" => ElementKind::Rotator,
            "linear_polarizer" => ElementKind::LinearPolarizer,
            "birefringent" => ElementKind::Birefringent,
            _ => return Err(Error::UnknownElement),
        })
    }
}

/// Builds the Jones matrix of `kind` with a single angle or phase parameter.
/// The parameter is ignored for the Faraday mirror; a birefringent segment
/// built here has its axis along horizontal.
pub fn make_element(kind: ElementKind, param: f64) -> Result<ElementMatrix> {
    let element = match kind {
        ElementKind::FaradayMirror => Element::FaradayMirror,
        ElementKind::PhaseModulator => Element::PhaseModulator(param),
        ElementKind::HalfWavePlate => Element::HalfWavePlate(param),
        ElementKind::Rotator => Element::Rotator(param),
        ElementKind::LinearPolarizer => Element::LinearPolarizer(param),
        ElementKind::Birefringent => Element::Birefringent {
            retardance: param,
            axis: 0.0,
        },
    };
    element.matrix()
}

pub fn apply(m: &ElementMatrix, s: &PolarizationState) -> PolarizationState {
    m.apply(s)
}

/// Matrix for light travelling back through an element whose forward matrix
/// is `forward`. Reciprocal media only.
pub fn backward_of(forward: &ElementMatrix) -> ElementMatrix {
    forward.transpose()
}

/// `backward_of(fiber) * mirror * fiber`.
///
/// With `mirror` the Faraday mirror this equals `e^{i beta} * mirror` where
/// `beta = arg det(fiber)` (see [`round_trip_phase`]), so the returned
/// polarization is orthogonal to the input whatever the fiber does.
pub fn round_trip(fiber_forward: &ElementMatrix, mirror: &ElementMatrix) -> Result<ElementMatrix> {
    if !fiber_forward.is_unitary(UNITARITY_TOL) {
        return Err(Error::Precondition("fiber matrix must be unitary"));
    }
    Ok(backward_of(fiber_forward) * *mirror * *fiber_forward)
}

/// Scalar phase picked up on a Faraday-mirror round trip through `fiber`.
pub fn round_trip_phase(fiber_forward: &ElementMatrix) -> f64 {
    fiber_forward.det().arg()
}

/// Splits `s` at a polarizing beamsplitter: `(transmitted h, reflected v)`.
pub fn pbs_split(s: &PolarizationState) -> (Complex64, Complex64) {
    (s.h, s.v)
}

/// Named polarizations used to label the combined output state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolarizationClass {
    Plus45,
    Minus45,
    LeftCircular,
    RightCircular,
    Horizontal,
    Vertical,
    Elliptical,
}

impl PolarizationClass {
    pub fn is_linear_diagonal(self) -> bool {
        matches!(self, PolarizationClass::Plus45 | PolarizationClass::Minus45)
    }

    pub fn is_circular(self) -> bool {
        matches!(self, PolarizationClass::LeftCircular | PolarizationClass::RightCircular)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PolarizationClass::Plus45 => "PLUS45",
            PolarizationClass::Minus45 => "MINUS45",
            PolarizationClass::LeftCircular => "LEFT_CIRCULAR",
            PolarizationClass::RightCircular => "RIGHT_CIRCULAR",
            PolarizationClass::Horizontal => "HORIZONTAL",
            PolarizationClass::Vertical => "VERTICAL",
            PolarizationClass::Elliptical => "ELLIPTICAL",
        }
    }
}

impl fmt::Display for PolarizationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labels `s` by its position on the Poincare sphere. Global phase drops out
/// of the Stokes coordinates, so the label does too.
pub fn classify(s: &PolarizationState) -> Result<PolarizationClass> {
    let [s1, s2, s3] = s.stokes()?;
    let near = |x: f64, target: f64| libm::fabs(x - target) <= CLASSIFY_TOL;
    let at = |a: f64, b: f64, c: f64| near(s1, a) && near(s2, b) && near(s3, c);
    Ok(if at(0.0, 1.0, 0.0) {
        PolarizationClass::Plus45
    } else if at(0.0, -1.0, 0.0) {
        PolarizationClass::Minus45
    } else if at(0.0, 0.0, 1.0) {
        PolarizationClass::LeftCircular
    } else if at(0.0, 0.0, -1.0) {
        PolarizationClass::RightCircular
    } else if at(1.0, 0.0, 0.0) {
        PolarizationClass::Horizontal
    } else if at(-1.0, 0.0, 0.0) {
        PolarizationClass::Vertical
    } else {
        PolarizationClass::Elliptical
    })
}

/// Born-rule probability `|| analyzer * s ||^2` for a normalized `s`.
pub fn detection_probability(s: &PolarizationState, analyzer: &ElementMatrix) -> f64 {
    analyzer.apply(s).norm_sqr()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8, PI};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn half_wave_plate_at_22_5_maps_plus45_to_horizontal() {
        // [[cos45, sin45], [sin45, -cos45]] (1,1)/sqrt2 = (1, 0)
        let hwp = make_element(ElementKind::HalfWavePlate, FRAC_PI_8).unwrap();
        let out = hwp.apply(&PolarizationState::plus45());
        assert!(close(out.h, c(1.0, 0.0), 1e-15));
        assert!(close(out.v, c(0.0, 0.0), 1e-15));
    }

    #[test]
    fn zero_phase_modulator_is_identity() {
        let pm = make_element(ElementKind::PhaseModulator, 0.0).unwrap();
        assert_eq!(pm, ElementMatrix::identity());
    }

    #[test]
    fn faraday_mirror_turns_polarization_orthogonal() {
        let fm = Element::FaradayMirror.matrix().unwrap();
        let out = fm.apply(&PolarizationState::vertical());
        assert_eq!(out, PolarizationState::horizontal());
        let out = fm.apply(&PolarizationState::horizontal());
        assert_eq!(out, PolarizationState::new(c(0.0, 0.0), c(-1.0, 0.0)));
        assert_eq!(out.inner(&PolarizationState::horizontal()), c(0.0, 0.0));
        // Circular light comes back with the same lab-frame rotation sense,
        // i.e. opposite helicity, and is blocked by the input analyzer.
        let l = PolarizationState::left_circular();
        assert!(l.return_overlap(&fm.apply(&l)).norm() < 1e-15);
    }

    #[test]
    fn apply_examples() {
        let s = PolarizationState::new(c(0.3, 0.1), c(-0.2, 0.7));
        assert_eq!(ElementMatrix::identity() * s, s);
        let pm = make_element(ElementKind::PhaseModulator, PI).unwrap();
        let out = pm * PolarizationState::horizontal();
        assert!(close(out.h, c(-1.0, 0.0), 1e-15));
        assert!(close(out.v, c(0.0, 0.0), 1e-15));
    }

    #[test]
    fn element_kind_parse() {
        assert_eq!("rotator".parse::<ElementKind>().unwrap(), ElementKind::Rotator);
        assert_eq!("quarter_wave_plate".parse::<ElementKind>(), Err(Error::UnknownElement));
    }

    #[test]
    fn non_finite_parameter_rejected() {
        assert!(matches!(
            make_element(ElementKind::Rotator, f64::NAN),
            Err(Error::InvalidArgument(_))
        ));
        assert!(make_element(ElementKind::HalfWavePlate, f64::INFINITY).is_err());
    }

    #[test]
    fn backward_examples() {
        assert_eq!(backward_of(&ElementMatrix::identity()), ElementMatrix::identity());
        let a = 0.61;
        let fwd = make_element(ElementKind::Rotator, a).unwrap();
        let inv = make_element(ElementKind::Rotator, -a).unwrap();
        assert!(backward_of(&fwd).max_abs_diff(&inv) < 1e-15);
        let b = make_element(ElementKind::Birefringent, 1.3).unwrap();
        assert_eq!(backward_of(&b), b);
    }

    #[test]
    fn round_trip_identity_and_rotator() {
        let fm = Element::FaradayMirror.matrix().unwrap();
        let rt = round_trip(&ElementMatrix::identity(), &fm).unwrap();
        assert_eq!(rt, fm);
        assert_eq!(round_trip_phase(&ElementMatrix::identity()), 0.0);

        // R^T F R = det(R) F and det R = 1.
        let r = make_element(ElementKind::Rotator, 37f64.to_radians()).unwrap();
        let rt = round_trip(&r, &fm).unwrap();
        assert!(rt.max_abs_diff(&fm) < 1e-15);
    }

    #[test]
    fn round_trip_rejects_lossy_fiber() {
        let fm = Element::FaradayMirror.matrix().unwrap();
        let pol = make_element(ElementKind::LinearPolarizer, 0.2).unwrap();
        assert!(matches!(round_trip(&pol, &fm), Err(Error::Precondition(_))));
    }

    #[test]
    fn pbs_split_examples() {
        assert_eq!(pbs_split(&PolarizationState::horizontal()), (c(1.0, 0.0), c(0.0, 0.0)));
        assert_eq!(pbs_split(&PolarizationState::vertical()), (c(0.0, 0.0), c(1.0, 0.0)));
        let (t, r) = pbs_split(&PolarizationState::plus45());
        assert!(close(t, c(FRAC_1_SQRT_2, 0.0), 1e-16));
        assert!(close(r, c(FRAC_1_SQRT_2, 0.0), 1e-16));
    }

    #[test]
    fn classify_canonical_states() {
        use PolarizationClass::*;
        assert_eq!(classify(&PolarizationState::plus45()).unwrap(), Plus45);
        assert_eq!(classify(&PolarizationState::minus45()).unwrap(), Minus45);
        assert_eq!(classify(&PolarizationState::left_circular()).unwrap(), LeftCircular);
        assert_eq!(classify(&PolarizationState::right_circular()).unwrap(), RightCircular);
        assert_eq!(classify(&PolarizationState::horizontal()).unwrap(), Horizontal);
        assert_eq!(classify(&PolarizationState::vertical()).unwrap(), Vertical);
        let ell = PolarizationState::new(c(0.8, 0.0), c(0.0, 0.6));
        assert_eq!(classify(&ell).unwrap(), Elliptical);
    }

    #[test]
    fn classify_rejects_zero_vector() {
        let zero = PolarizationState::new(c(0.0, 0.0), c(0.0, 0.0));
        assert!(matches!(classify(&zero), Err(Error::InvalidArgument(_))));
        assert!(zero.normalize().is_err());
    }

    #[test]
    fn polarizer_probabilities() {
        let p45 = make_element(ElementKind::LinearPolarizer, FRAC_PI_4).unwrap();
        assert!((detection_probability(&PolarizationState::plus45(), &p45) - 1.0).abs() < 1e-15);
        assert!((detection_probability(&PolarizationState::horizontal(), &p45) - 0.5).abs() < 1e-15);
        assert!((detection_probability(&PolarizationState::left_circular(), &p45) - 0.5).abs() < 1e-15);
        assert!(detection_probability(&PolarizationState::minus45(), &p45).abs() < 1e-15);
    }

    #[test]
    fn polarizer_is_projector() {
        for k in 0..16 {
            let p = make_element(ElementKind::LinearPolarizer, k as f64 * 0.37).unwrap();
            assert!((p * p).max_abs_diff(&p) < 1e-12);
        }
    }

    fn arb_unitary() -> impl Strategy<Value = ElementMatrix> {
        (-PI..PI, 0.0..PI, -PI..PI, -PI..PI).prop_map(|(g, t, a, b)| ElementMatrix::unitary(g, t, a, b))
    }

    fn arb_state() -> impl Strategy<Value = PolarizationState> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero", |(a, b, x, y)| a * a + b * b + x * x + y * y > 1e-3)
            .prop_map(|(a, b, x, y)| PolarizationState::new(c(a, b), c(x, y)).normalize().unwrap())
    }

    fn arb_lossless_element() -> impl Strategy<Value = ElementMatrix> {
        (0usize..5, -10.0..10.0f64, -PI..PI).prop_map(|(k, p, axis)| {
            match k {
                0 => Element::FaradayMirror,
                1 => Element::PhaseModulator(p),
                2 => Element::HalfWavePlate(p),
                3 => Element::Rotator(p),
                _ => Element::Birefringent { retardance: p, axis },
            }
            .matrix()
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn lossless_elements_are_unitary(m in arb_lossless_element()) {
            prop_assert!(m.unitarity_defect() < 1e-12);
        }

        #[test]
        fn normalize_gives_unit_norm(s in arb_state(), k in 0.01..50.0f64) {
            let scaled = s.scale(c(k, -0.3 * k));
            let n = scaled.normalize().unwrap();
            prop_assert!((n.norm_sqr() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn faraday_round_trip_is_orthogonal(u in arb_unitary(), s in arb_state()) {
            let fm = Element::FaradayMirror.matrix().unwrap();
            let rt = round_trip(&u, &fm).unwrap();
            prop_assert!(s.return_overlap(&rt.apply(&s)).norm() < 1e-10);
            let expected = fm.scale(Complex64::from_polar(1.0, round_trip_phase(&u)));
            prop_assert!(rt.max_abs_diff(&expected) < 1e-10);
        }

        #[test]
        fn backward_is_an_involution(u in arb_unitary(), k in 0.1..3.0f64) {
            let m = u.scale(c(k, 0.2));
            prop_assert_eq!(backward_of(&backward_of(&m)), m);
        }

        #[test]
        fn global_phase_invariance(s in arb_state(), gamma in -PI..PI, alpha in -PI..PI) {
            let t = s.scale(Complex64::from_polar(1.0, gamma));
            prop_assert_eq!(classify(&s).unwrap(), classify(&t).unwrap());
            let pol = Element::LinearPolarizer(alpha).matrix().unwrap();
            prop_assert!((detection_probability(&s, &pol) - detection_probability(&t, &pol)).abs() < 1e-12);
        }

        #[test]
        fn pbs_split_is_lossless(s in arb_state(), k in 0.1..4.0f64) {
            let s = s.scale(c(k, 0.0));
            let (t, r) = pbs_split(&s);
            prop_assert!((t.norm_sqr() + r.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
        }
    }
}
