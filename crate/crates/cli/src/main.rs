use clap::Parser;
use coalhc_cli::{run, thread_cap, Cli};

fn main() {
    let cli = Cli::parse();
    let result = thread_cap().and_then(|cap| match cap {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| coalhc_cli::CliError::config(e.to_string()))?
            .install(|| run(cli)),
        None => run(cli),
    });
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.code);
    }
}
