//! Physical quantities written as `"<number> <unit>"` strings.

use std::fmt;
use std::marker::PhantomData;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

/// A physical dimension: its SI unit and the spellings accepted for it.
pub trait Dimension {
    const NAME: &'static str;
    const SI: &'static str;
    /// `(spelling, factor to SI)`.
    const UNITS: &'static [(&'static str, f64)];
}

macro_rules! dimension {
    ($ty:ident, $name:literal, $si:literal, [$(($u:literal, $f:expr)),* $(,)?]) => {
        #[derive(Debug, Clone, Copy, PartialEq)]
        pub struct $ty;
        impl Dimension for $ty {
            const NAME: &'static str = $name;
            const SI: &'static str = $si;
            const UNITS: &'static [(&'static str, f64)] = &[$(($u, $f)),*];
        }
    };
}

const TAU: f64 = std::f64::consts::TAU;

dimension!(
    Length,
    "length",
    "m",
    [
        ("m", 1.0),
        ("cm", 1e-2),
        ("mm", 1e-3),
        ("um", 1e-6),
        ("µm", 1e-6),
        ("nm", 1e-9),
    ]
);
dimension!(
    Time,
    "time",
    "s",
    [
        ("s", 1.0),
        ("ms", 1e-3),
        ("us", 1e-6),
        ("µs", 1e-6),
        ("ns", 1e-9),
    ]
);
dimension!(
    Temperature,
    "temperature",
    "K",
    [
        ("K", 1.0),
        ("mK", 1e-3),
        ("uK", 1e-6),
        ("µK", 1e-6),
        ("nK", 1e-9),
    ]
);
dimension!(
    Mass,
    "mass",
    "kg",
    [
        ("kg", 1.0),
        ("g", 1e-3),
        ("u", 1.660_539_066_60e-27),
        ("Da", 1.660_539_066_60e-27),
    ]
);
dimension!(
    Angle,
    "angle",
    "rad",
    [
        ("rad", 1.0),
        ("mrad", 1e-3),
        ("urad", 1e-6),
        ("µrad", 1e-6),
        ("deg", std::f64::consts::PI / 180.0),
    ]
);
dimension!(
    Wavenumber,
    "wavenumber",
    "rad/m",
    [
        ("rad/m", 1.0),
        ("1/m", 1.0),
        ("rad/mm", 1e3),
        ("rad/um", 1e6),
        ("rad/µm", 1e6),
    ]
);
dimension!(
    Rate,
    "rate",
    "1/s",
    [
        ("1/s", 1.0),
        ("rad/s", 1.0),
        ("1/ms", 1e3),
        ("1/us", 1e6),
        ("1/µs", 1e6),
        ("krad/s", 1e3),
        ("Mrad/s", 1e6),
        ("Grad/s", 1e9),
        ("Hz", TAU),
        ("kHz", TAU * 1e3),
        ("MHz", TAU * 1e6),
    ]
);
dimension!(
    Gradient,
    "field gradient",
    "rad/(s*m)",
    [
        ("rad/(s*m)", 1.0),
        ("rad/(s m)", 1.0),
        ("rad/s/m", 1.0),
        ("rad/(s*mm)", 1e3),
        ("rad/(s*um)", 1e6),
    ]
);

/// A value stored in SI units, tagged with its dimension.
pub struct Quantity<D> {
    si: f64,
    _dim: PhantomData<D>,
}

impl<D> Clone for Quantity<D> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<D> Copy for Quantity<D> {}

impl<D> PartialEq for Quantity<D> {
    fn eq(&self, other: &Self) -> bool {
        self.si == other.si
    }
}

impl<D: Dimension> fmt::Debug for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl<D: Dimension> Quantity<D> {
    pub fn si(si: f64) -> Self {
        Self {
            si,
            _dim: PhantomData,
        }
    }

    pub fn value(&self) -> f64 {
        self.si
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        let (num, unit) = text.split_once(char::is_whitespace).ok_or_else(|| {
            format!(
                "`{text}` has no unit; write a {} as `<number> <unit>`, e.g. \"1 {}\"",
                D::NAME,
                D::SI
            )
        })?;
        let value: f64 = num
            .parse()
            .map_err(|_| format!("`{num}` is not a number"))?;
        if !value.is_finite() {
            return Err(format!("`{num}` is not finite"));
        }
        let unit = unit.trim();
        let factor = D::UNITS
            .iter()
            .find(|(u, _)| *u == unit)
            .map(|(_, f)| *f)
            .ok_or_else(|| {
                let known: Vec<&str> = D::UNITS.iter().map(|(u, _)| *u).collect();
                format!(
                    "`{unit}` is not a {} unit (expected one of {})",
                    D::NAME,
                    known.join(", ")
                )
            })?;
        // divide by exact powers of ten so "100 um" is exactly 100e-6
        let inv = 1.0 / factor;
        let si = if factor < 1.0 && (inv.round() - inv).abs() <= 1e-9 * inv {
            value / inv.round()
        } else {
            value * factor
        };
        Ok(Self::si(si))
    }
}

/// Canonical form: the SI value in shortest round-trip notation.
impl<D: Dimension> fmt::Display for Quantity<D> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}", self.si, D::SI)
    }
}

impl<D: Dimension> Serialize for Quantity<D> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de, D: Dimension> Deserialize<'de> for Quantity<D> {
    fn deserialize<De: Deserializer<'de>>(d: De) -> Result<Self, De::Error> {
        struct V<D>(PhantomData<D>);
        impl<D: Dimension> Visitor<'_> for V<D> {
            type Value = Quantity<D>;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "a {} string such as \"1 {}\"", D::NAME, D::SI)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                Quantity::parse(v).map_err(E::custom)
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                Err(E::custom(format!(
                    "{v} has no unit; write it as \"{v} {}\"",
                    D::SI
                )))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                self.visit_f64(v as f64)
            }
        }
        d.deserialize_str(V(PhantomData))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_prefixed_units() {
        assert_eq!(Quantity::<Length>::parse("100 um").unwrap().value(), 100e-6);
        assert_eq!(Quantity::<Length>::parse("780 nm").unwrap().value(), 780e-9);
        assert_eq!(
            Quantity::<Temperature>::parse(" 2.5 µK ").unwrap().value(),
            2.5e-6
        );
        assert_eq!(Quantity::<Rate>::parse("1 kHz").unwrap().value(), TAU * 1e3);
        let g = Quantity::<Gradient>::parse("3 rad/(s*mm)").unwrap();
        assert_eq!(g.value(), 3e3);
    }

    #[test]
    fn rejects_missing_or_foreign_units() {
        let e = Quantity::<Length>::parse("100").unwrap_err();
        assert!(e.contains("no unit"), "{e}");
        let e = Quantity::<Length>::parse("1 ms").unwrap_err();
        assert!(e.contains("not a length unit"), "{e}");
        assert!(Quantity::<Time>::parse("x s").is_err());
        assert!(Quantity::<Time>::parse("inf s").is_err());
    }

    #[test]
    fn display_round_trips() {
        let q = Quantity::<Length>::parse("123.456 um").unwrap();
        let back = Quantity::<Length>::parse(&q.to_string()).unwrap();
        assert_eq!(q, back);
    }
}
