/// Constant `base_lr` before `decay_start`, then linear decay reaching zero
/// at `total_epochs`.
pub fn lr_schedule(base_lr: f64, epoch: usize, total_epochs: usize, decay_start: usize) -> f64 {
    if epoch < decay_start {
        return base_lr;
    }
    if total_epochs <= decay_start || epoch >= total_epochs {
        return 0.0;
    }
    base_lr * (total_epochs - epoch) as f64 / (total_epochs - decay_start) as f64
}
