fn main() {
    println!("slicesim");
}
