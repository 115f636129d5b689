//! Receiver-complexity accounting for the three schemes.

use crate::error::{Error, Result};
use crate::scenario::Scheme;

/// Parameters of the receiver-complexity order formulas.
#[derive(Debug, Clone, Copy)]
pub struct ComplexityParams {
    /// Message-passing iteration count.
    pub i_t: u64,
    /// Codebook alphabet size.
    pub pi_size: u64,
    /// Nonzero entries per factor-graph row.
    pub d: u64,
    /// Codebooks assigned per user (codebook-domain schemes).
    pub g: u64,
    /// Users superposed per codebook (codebook-domain schemes).
    pub l_t: u64,
    /// Subcarriers assigned per user (PD-NOMA).
    pub g_prime: u64,
    /// Users superposed per subcarrier (PD-NOMA).
    pub l_t_prime: u64,
}

impl ComplexityParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("i_t", self.i_t),
            ("pi_size", self.pi_size),
            ("d", self.d),
            ("g", self.g),
            ("l_t", self.l_t),
            ("g_prime", self.g_prime),
            ("l_t_prime", self.l_t_prime),
        ];
        for (name, value) in fields {
            if value < 1 {
                return Err(Error::InvalidConfig {
                    field: name.into(),
                    reason: "complexity parameters must be >= 1".into(),
                });
            }
        }
        Ok(())
    }
}

/// Detection operation count for one user under the given scheme.
///
/// A code-domain receiver runs message passing for `i_t` rounds over an
/// alphabet of `pi_size` with row weight `d`; reusing a codebook `l_t` times
/// multiplies that work by `g * l_t` passes. The PD-NOMA count follows the
/// cubic MMSE-and-cancel form in `l_t_prime` and `g_prime`.
pub fn receiver_complexity(params: &ComplexityParams, scheme: Scheme) -> u64 {
    let mpa = params.i_t as u128 * (params.pi_size as u128).pow(params.d as u32);
    let count: u128 = match scheme {
        Scheme::Scma => mpa,
        Scheme::Psma => mpa * params.g as u128 * params.l_t as u128,
        Scheme::Pdnoma => {
            let l = params.l_t_prime as u128;
            let g = params.g_prime as u128;
            (2 * l.pow(3) + 2 * l.pow(2) * g) * (l - 1)
        }
    };
    count.min(u64::MAX as u128) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(i_t: u64, pi: u64, d: u64, g: u64, l_t: u64, g_p: u64, l_p: u64) -> ComplexityParams {
        ComplexityParams {
            i_t,
            pi_size: pi,
            d,
            g,
            l_t,
            g_prime: g_p,
            l_t_prime: l_p,
        }
    }

    #[test]
    fn reference_operating_points() {
        let p = params(3, 8, 3, 4, 3, 4, 3);
        assert_eq!(receiver_complexity(&p, Scheme::Scma), 1536);
        assert_eq!(receiver_complexity(&p, Scheme::Psma), 18_432);
        assert_eq!(receiver_complexity(&p, Scheme::Psma), 12 * 1536);

        let p = params(4, 10, 4, 5, 4, 5, 4);
        assert_eq!(receiver_complexity(&p, Scheme::Scma), 40_000);
        assert_eq!(receiver_complexity(&p, Scheme::Psma), 800_000);
        assert_eq!(receiver_complexity(&p, Scheme::Psma), 20 * 40_000);
    }

    #[test]
    fn pdnoma_cubic_form() {
        // (2*27 + 2*9*4) * 2 and (2*64 + 2*16*5) * 3, straight from the
        // printed order formula.
        let p = params(3, 8, 3, 4, 3, 4, 3);
        assert_eq!(receiver_complexity(&p, Scheme::Pdnoma), 252);
        let p = params(4, 10, 4, 5, 4, 5, 4);
        assert_eq!(receiver_complexity(&p, Scheme::Pdnoma), 864);
    }

    #[test]
    fn validation_rejects_zero_counts() {
        let mut p = params(3, 8, 3, 4, 3, 4, 3);
        assert!(p.validate().is_ok());
        p.d = 0;
        assert!(p.validate().is_err());
    }
}
