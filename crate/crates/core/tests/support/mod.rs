pub mod ap_oracle;
pub mod instances;
pub mod reference;
