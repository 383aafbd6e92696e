use std::path::Path;

use ranksr_core::save_image;
use ranksr_core::synthetic::DeadLeaves;

pub fn write_leaves(dir: &Path, n: usize, size: usize, seed: u64) {
    std::fs::create_dir_all(dir).unwrap();
    let gen = DeadLeaves {
        max_radius: 16.0,
        ..DeadLeaves::default()
    };
    for i in 0..n {
        save_image(
            &gen.render(size, size, seed + i as u64),
            dir.join(format!("img{i:03}.png")),
        )
        .unwrap();
    }
}

/// A config small enough to run every pipeline stage in seconds.
pub fn tiny_config(root: &Path, seed: u64) -> String {
    format!(
        r#"
seed = {seed}
name = "tiny"

[data]
root = "{root}"
train = "train"
val = "val"

[rankdata]
kind = "sr"
levels = ["bicubic", "srresnet", "blur:1.0"]
val_fraction = 0.25
patch = {{ size = 32, stride = 32 }}

[ranker]
arch = "vgg8"
base_channels = 2
[ranker.train]
total_iters = 30
batch = 4
eval_every = 10
log_every = 10

[gan.pretrain]
hr_patch = 32
lr_patch = 8
batch = 2
total_iters = 20
val_every = 10
log_every = 10
milestones = []
generator = {{ residual_blocks = 1, base_channels = 4 }}

[gan.train]
hr_patch = 32
lr_patch = 8
batch = 2
total_iters = 10
val_every = 5
log_every = 5
milestones = []
generator = {{ residual_blocks = 1, base_channels = 4 }}
discriminator = {{ base_channels = 2, hidden = 8 }}
extractor = {{ width_divisor = 16 }}

[eval]
metrics = ["niqe", "psnr"]
"#,
        root = root.display()
    )
}
