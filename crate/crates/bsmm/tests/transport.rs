use std::thread;
use std::time::{Duration, Instant};

use bsmm::transport::{channel_fabric, HandleState, LinkModel, Transport};
use bsmm::Error;

#[test]
fn empty_handle_list_returns_at_once() {
    let mut eps = channel_fabric(2, LinkModel::default());
    let done = eps[0].waitall(&[]).unwrap();
    assert!(done.elapsed < Duration::from_millis(1), "{:?}", done.elapsed);
}

#[test]
fn completed_handles_cost_nothing() {
    let mut eps = channel_fabric(2, LinkModel::instant());
    let mut e1 = eps.pop().unwrap();
    let mut e0 = eps.pop().unwrap();
    let s = e0.isend(1, 4, vec![9; 64]).unwrap();
    let r = e1.irecv(0, 4).unwrap();
    // let the message land before waiting
    thread::sleep(Duration::from_millis(5));
    let done = e1.waitall(&[r]).unwrap();
    assert!(done.elapsed < Duration::from_millis(1), "{:?}", done.elapsed);
    assert_eq!(done.payloads[0].as_deref(), Some(&[9u8; 64][..]));
    let done = e0.waitall(&[s]).unwrap();
    assert!(done.elapsed < Duration::from_millis(1));
}

#[test]
fn late_sender_is_waited_for() {
    let mut eps = channel_fabric(2, LinkModel::instant());
    let mut e1 = eps.pop().unwrap();
    let mut e0 = eps.pop().unwrap();
    let h = e0.irecv(1, 0).unwrap();
    let sender = thread::spawn(move || {
        thread::sleep(Duration::from_millis(50));
        e1.isend(0, 0, vec![1, 2, 3]).unwrap();
        e1
    });
    let done = e0.waitall(&[h]).unwrap();
    let ms = done.elapsed.as_secs_f64() * 1e3;
    assert!((45.0..=200.0).contains(&ms), "{ms} ms");
    assert_eq!(done.bytes_received, 3);
    sender.join().unwrap();
}

#[test]
fn injected_link_delay_is_waited_for() {
    let mut eps = channel_fabric(2, LinkModel::fixed_delay(Duration::from_millis(50)));
    let mut e1 = eps.pop().unwrap();
    let mut e0 = eps.pop().unwrap();
    let h = e0.irecv(1, 0).unwrap();
    e1.isend(0, 0, vec![0; 10]).unwrap();
    let done = e0.waitall(&[h]).unwrap();
    let ms = done.elapsed.as_secs_f64() * 1e3;
    assert!((45.0..=200.0).contains(&ms), "{ms} ms");
}

#[test]
fn overlapped_compute_hides_latency() {
    let mut eps = channel_fabric(2, LinkModel::fixed_delay(Duration::from_millis(30)));
    let mut e1 = eps.pop().unwrap();
    let mut e0 = eps.pop().unwrap();
    let h = e0.irecv(1, 0).unwrap();
    e1.isend(0, 0, vec![0; 10]).unwrap();
    let busy = Instant::now();
    while busy.elapsed() < Duration::from_millis(40) {}
    let done = e0.waitall(&[h]).unwrap();
    assert!(done.elapsed < Duration::from_millis(5), "{:?}", done.elapsed);
}

#[test]
fn handles_cannot_be_completed_twice() {
    let mut eps = channel_fabric(2, LinkModel::instant());
    let mut e1 = eps.pop().unwrap();
    let mut e0 = eps.pop().unwrap();
    e1.isend(0, 0, vec![5]).unwrap();
    let h = e0.irecv(1, 0).unwrap();
    e0.waitall(&[h]).unwrap();
    assert_eq!(e0.state(&h), Some(HandleState::Consumed));
    assert!(matches!(e0.waitall(&[h]), Err(Error::Parameter(_))));
}
