//! Print the default pipeline configuration in its file format.

fn main() {
    print!("{}", textscrub::app::PipelineConfig::default().to_text());
}
