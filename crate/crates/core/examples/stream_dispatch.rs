//! Walk a small stream through windows, round-robin bins and the drop
//! queue, and print the timing formulas of the field setup.
//!
//! ```text
//! cargo run --example stream_dispatch
//! ```

use crowd_contest::contest::{ContestConfig, WorkerId};
use crowd_contest::experiment::generate_corpus;
use crowd_contest::sim::sampling::substream;
use crowd_contest::stream::{
    advance_queue, build_windows, solve_from, task_intensity, total_contest_time, warp_out_rate,
    DropQueue, RoundRobin,
};

fn main() -> crowd_contest::Result<()> {
    let field = ContestConfig::field_defaults();
    println!(
        "field setup: {} posts, {} per window, {} s per window -> {} s contest",
        field.n_posts,
        field.window_size,
        field.task_unit_time_s,
        total_contest_time(field.n_posts, field.task_unit_time_s, field.window_size)
    );
    println!(
        "task intensity {} for {} workers; warp_out_rate(200, 10) = {:.6}",
        task_intensity(field.arrival_rate, field.service_rate())?,
        field.n_workers,
        warp_out_rate(200.0, 10.0)?
    );

    // 3 workers, windows of 8 posts in bins of 2: one bin per window is left over
    let posts = generate_corpus(24, &mut substream(3, 1), 1.2)?;
    let windows = build_windows(&posts, 8, 10.0);
    let workers = [WorkerId(0), WorkerId(1), WorkerId(2)];
    let mut rr = RoundRobin::new();
    let mut queue = DropQueue::new();
    let mut open = Vec::new();
    for w in &windows {
        let close_ms = w.close_ms(10_000);
        advance_queue(&mut queue, w.open_ms(10_000), &mut open)?;
        queue.ingest(w, close_ms);
        let alloc = rr.allocate(w, &workers, 2);
        for a in &alloc.assignments {
            let bin: Vec<u64> = a.bin.iter().map(|p| p.0).collect();
            println!("window {} -> {}: posts {bin:?}", w.index, a.worker_id);
        }
        let leftover: Vec<u64> = alloc.leftover.iter().map(|p| p.0).collect();
        println!("window {} leftover in queue: {leftover:?}", w.index);
        open.extend(queue.dispatch(&alloc)?);
        // worker 0 clears its bin and takes one post from the queue
        if let Some(bin) = open
            .iter_mut()
            .find(|b| b.assignment.worker_id == WorkerId(0))
        {
            while solve_from(&mut queue, bin).is_some() {}
        }
        queue.take_front();
        println!("  {:?}", queue.accounting(&open));
    }
    let dropped = advance_queue(&mut queue, u64::MAX, &mut open)?;
    let a = queue.accounting(&open);
    println!(
        "end of stream: {dropped} dropped at the last close; {a:?}, conserved: {}",
        a.is_conserved()
    );
    Ok(())
}
