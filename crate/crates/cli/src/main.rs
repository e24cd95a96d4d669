fn main() {
    println!("dynmsf placeholder");
}
