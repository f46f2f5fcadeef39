//! History buffer of generated images for discriminator updates: fills to
//! capacity, then each query returns either the fresh image or swaps it for a
//! stored one with probability 1/2.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::elem::Elem;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct ImagePool<T> {
    capacity: usize,
    items: Vec<Tensor<T>>,
}

impl<T: Elem> ImagePool<T> {
    pub fn new(capacity: usize) -> Self {
        ImagePool { capacity, items: Vec::with_capacity(capacity) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn items(&self) -> &[Tensor<T>] {
        &self.items
    }

    pub fn restore(capacity: usize, items: Vec<Tensor<T>>) -> Self {
        assert!(items.len() <= capacity || capacity == 0);
        ImagePool { capacity, items }
    }

    /// Capacity 0 disables the pool (always pass-through).
    pub fn query(&mut self, rng: &mut ChaCha8Rng, img: Tensor<T>) -> Tensor<T> {
        if self.capacity == 0 {
            return img;
        }
        if self.items.len() < self.capacity {
            self.items.push(img.clone());
            return img;
        }
        if rng.random::<f64>() < 0.5 {
            let i = rng.random_range(0..self.items.len());
            std::mem::replace(&mut self.items[i], img)
        } else {
            img
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn tagged(v: f64) -> Tensor<f64> {
        Tensor::full(&[1], v)
    }

    #[test]
    fn passes_through_until_full() {
        let mut pool = ImagePool::new(3);
        let mut rng = rng_from(1);
        for i in 0..3 {
            let out = pool.query(&mut rng, tagged(i as f64));
            assert_eq!(out.data[0], i as f64);
        }
        assert_eq!(pool.items().len(), 3);
    }

    #[test]
    fn full_pool_sometimes_swaps() {
        let mut pool = ImagePool::new(3);
        let mut rng = rng_from(1);
        for i in 0..3 {
            pool.query(&mut rng, tagged(i as f64));
        }
        let mut swapped = false;
        for i in 3..100 {
            let out = pool.query(&mut rng, tagged(i as f64));
            if out.data[0] != i as f64 {
                swapped = true;
            }
        }
        assert!(swapped);
        assert_eq!(pool.items().len(), 3);
    }

    #[test]
    fn zero_capacity_disables() {
        let mut pool = ImagePool::new(0);
        let mut rng = rng_from(1);
        for i in 0..10 {
            let out = pool.query(&mut rng, tagged(i as f64));
            assert_eq!(out.data[0], i as f64);
        }
        assert!(pool.items().is_empty());
    }
}
