use serde::{Deserialize, Serialize};

/// Achieved information terms of one solution, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoReport {
    pub i_x_t1: f64,
    pub i_x_t2: f64,
    pub i_t1_t2: f64,
    pub i_y_t1t2: f64,
    pub functional_value: f64,
}

impl InfoReport {
    /// Assembles a report and evaluates
    /// `F = -I(Y;T1,T2) + beta I(X;T1) + lambda I(X;T2) + gamma I(T1;T2)`.
    pub fn from_terms(
        i_x_t1: f64,
        i_x_t2: f64,
        i_t1_t2: f64,
        i_y_t1t2: f64,
        params: &crate::LagrangeParams,
    ) -> Self {
        let functional_value = -i_y_t1t2
            + params.beta * i_x_t1
            + params.lambda * i_x_t2
            + params.gamma * i_t1_t2;
        Self {
            i_x_t1,
            i_x_t2,
            i_t1_t2,
            i_y_t1t2,
            functional_value,
        }
    }

    pub fn field(&self, field: InfoField) -> f64 {
        match field {
            InfoField::IXT1 => self.i_x_t1,
            InfoField::IXT2 => self.i_x_t2,
            InfoField::IT1T2 => self.i_t1_t2,
            InfoField::IYT1T2 => self.i_y_t1t2,
            InfoField::Functional => self.functional_value,
        }
    }

    /// Same report with every information term converted to bits.
    pub fn in_bits(&self) -> Self {
        let k = std::f64::consts::LN_2;
        Self {
            i_x_t1: self.i_x_t1 / k,
            i_x_t2: self.i_x_t2 / k,
            i_t1_t2: self.i_t1_t2 / k,
            i_y_t1t2: self.i_y_t1t2 / k,
            functional_value: self.functional_value / k,
        }
    }
}

/// Selects one quantity of an [`InfoReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum InfoField {
    #[serde(rename = "i_x_t1")]
    IXT1,
    #[serde(rename = "i_x_t2")]
    IXT2,
    #[serde(rename = "i_t1_t2")]
    IT1T2,
    #[serde(rename = "i_y_t1t2")]
    IYT1T2,
    #[serde(rename = "functional")]
    Functional,
}

impl InfoField {
    pub const ALL: [InfoField; 5] = [
        InfoField::IXT1,
        InfoField::IXT2,
        InfoField::IT1T2,
        InfoField::IYT1T2,
        InfoField::Functional,
    ];

    pub fn key(self) -> &'static str {
        match self {
            InfoField::IXT1 => "i_x_t1",
            InfoField::IXT2 => "i_x_t2",
            InfoField::IT1T2 => "i_t1_t2",
            InfoField::IYT1T2 => "i_y_t1t2",
            InfoField::Functional => "functional",
        }
    }

    /// Human-readable axis label.
    pub fn label(self) -> &'static str {
        match self {
            InfoField::IXT1 => "I(X;T\u{2081})",
            InfoField::IXT2 => "I(X;T\u{2082})",
            InfoField::IT1T2 => "I(T\u{2081};T\u{2082})",
            InfoField::IYT1T2 => "I(Y;T\u{2081},T\u{2082})",
            InfoField::Functional => "F",
        }
    }
}

impl std::str::FromStr for InfoField {
    type Err = crate::DpflError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InfoField::ALL
            .into_iter()
            .find(|f| f.key() == s)
            .ok_or_else(|| crate::DpflError::UnknownField(s.to_string()))
    }
}

impl std::fmt::Display for InfoField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}
