use std::time::Duration;

use rand::Rng;

/// Token bucket with capacity one: dispatches are spaced at least
/// `1 / rate` apart.
#[derive(Debug, Clone)]
pub struct TokenBucket {
    interval: Duration,
    next_free: Option<Duration>,
}

impl TokenBucket {
    pub fn new(requests_per_second: f64) -> Self {
        TokenBucket { interval: Duration::from_secs_f64(1.0 / requests_per_second), next_free: None }
    }

    /// How long a caller arriving at `now` must wait, reserving the slot.
    pub fn reserve(&mut self, now: Duration) -> Duration {
        let slot = match self.next_free {
            Some(next) if next > now => next,
            _ => now,
        };
        self.next_free = Some(slot + self.interval);
        slot - now
    }
}

/// Exponential backoff: base 1 s, factor 2, up to 50% additive jitter.
pub fn backoff_delay(attempt: u32, rng: &mut impl Rng) -> Duration {
    let base = Duration::from_secs(1) * 2u32.saturating_pow(attempt);
    base + base.mul_f64(rng.gen_range(0.0..0.5))
}
