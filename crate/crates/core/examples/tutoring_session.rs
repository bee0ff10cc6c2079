//! A whole session without HTTP: solve with the tools, receive a hint, read
//! two explanation pages, then export the log and replay it.

use acsp::explain::PageId;
use acsp::interaction::ActionKind;
use acsp::service::{parse_log, replay, ActionRequest, Registry};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let registry = Registry::default();
    let mut session = registry.session("demo-1", "coloring", "demo")?;
    let mut now = 0;
    let mut hint = None;
    while hint.is_none() && now < 200_000 {
        for action in [ActionKind::AutoAC, ActionKind::Reset] {
            now += 700;
            let r = session.post_action(&ActionRequest::new(action), now)?;
            if r.hint.is_some() {
                println!("seq {}: {} with scores {:?}", r.seq, r.label, r.scores);
                hint = r.hint;
            }
        }
    }
    let hint = hint.ok_or("no hint delivered")?;
    println!("hint #{}: {}", hint.hint, hint.text);

    let page = session.explanation(PageId::WhyHint, now + 1000)?;
    println!("opened {:?}", page.title);
    session.page_closed(PageId::WhyHint, 4000, now + 5000)?;
    session.explanation(PageId::HowHint, now + 6000)?;
    session.feedback(PageId::HowHint, now + 8000)?;
    session.page_closed(PageId::HowHint, 3000, now + 9000)?;
    println!("stats {:?}", session.stats());

    let log = session.export_log();
    let original = session.final_state().digest();
    let fresh = registry.session("demo-1", "coloring", "demo")?;
    let report = replay(fresh, &parse_log(&log)?)?;
    println!("{} log lines, digest {} (matches: {})", report.lines, &report.digest[..16], report.digest == original);
    Ok(())
}
