use std::fmt;

/// Maximum number of arms supported by [`ArmSet`].
pub const MAX_ARMS: usize = 64;

/// A subset of `{0, .., K-1}` stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ArmSet(u64);

impl ArmSet {
    pub const EMPTY: ArmSet = ArmSet(0);

    /// The full set `[K]`.
    pub fn full(num_arms: usize) -> ArmSet {
        debug_assert!(num_arms <= MAX_ARMS);
        if num_arms == MAX_ARMS {
            ArmSet(u64::MAX)
        } else {
            ArmSet((1u64 << num_arms) - 1)
        }
    }

    pub fn singleton(arm: usize) -> ArmSet {
        ArmSet(1u64 << arm)
    }

    pub fn from_bits(bits: u64) -> ArmSet {
        ArmSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn contains(self, arm: usize) -> bool {
        arm < MAX_ARMS && self.0 & (1u64 << arm) != 0
    }

    pub fn insert(&mut self, arm: usize) {
        self.0 |= 1u64 << arm;
    }

    pub fn remove(&mut self, arm: usize) {
        self.0 &= !(1u64 << arm);
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: ArmSet) -> ArmSet {
        ArmSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ArmSet) -> ArmSet {
        ArmSet(self.0 & other.0)
    }

    pub fn difference(self, other: ArmSet) -> ArmSet {
        ArmSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: ArmSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// The `k`-th smallest member.
    pub fn nth(self, k: usize) -> Option<usize> {
        self.iter().nth(k)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let arm = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(arm)
            }
        })
    }
}

impl FromIterator<usize> for ArmSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut set = ArmSet::EMPTY;
        for arm in iter {
            set.insert(arm);
        }
        set
    }
}

impl fmt::Debug for ArmSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
