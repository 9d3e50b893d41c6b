//! Shared fixture helpers for the integration and acceptance suites.

use craic_cli::config::PipelineConfig;
use std::path::Path;

pub const PERSISTENCE_SRC: &str = include_str!("../fixtures/ProjectsServiceBaseImpl.java");
pub const UPLOAD_SRC: &str = include_str!("../fixtures/TransferManagerConfiguration.java");
pub const REGISTRAR_SRC: &str = include_str!("../fixtures/GCMRegistrar.java");

/// Write the three bundled fixture classes plus a few synthetic ones into
/// `dir`.
pub fn write_fixture_tree(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("ProjectsServiceBaseImpl.java"), PERSISTENCE_SRC).unwrap();
    std::fs::write(dir.join("TransferManagerConfiguration.java"), UPLOAD_SRC).unwrap();
    std::fs::write(dir.join("GCMRegistrar.java"), REGISTRAR_SRC).unwrap();
    for i in 0..8 {
        std::fs::write(dir.join(format!("Util{i}.java")), util_class(i)).unwrap();
    }
}

fn util_class(i: usize) -> String {
    format!(
        r#"public class Util{i} {{
  /* Returns the item count. */
  public int getItemCount{i}() {{ return itemCount{i}; }}

  /* Sets the item count.
     @param value the new count */
  public void setItemCount{i}(int value) {{ this.itemCount{i} = value; }}

  /* Loads the data from the given file.
     @throws IOException thrown on errors while reading */
  public void loadData{i}(String filename) throws IOException {{
    DataInputStream dis = new DataInputStream(new FileInputStream(filename));
    this.read(dis);
  }}

  /* Checks whether the cache is stale. Returns true when a reload is needed. */
  public boolean isStale{i}() {{ return clock.now() > deadline{i}; }}
}}
"#
    )
}

/// Desk-scale-but-tiny pipeline configuration for fast end-to-end runs.
pub fn tiny_pipeline_config(input: &Path, work: &Path, seed: u64) -> PipelineConfig {
    PipelineConfig {
        input: Some(input.to_path_buf()),
        work: work.to_path_buf(),
        seed,
        vocab_size: 300,
        hidden_size_lm: Some(12),
        hidden_size_s2s: Some(12),
        batch_size: Some(8),
        dropout_keep: Some(1.0),
        max_epochs_lm: Some(2),
        max_epochs_s2s: Some(2),
        ..PipelineConfig::default()
    }
}
