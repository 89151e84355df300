pub mod conditional;
pub mod density;
pub mod sample;
pub mod tilt;
pub mod validate;
