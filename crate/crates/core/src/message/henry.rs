use std::collections::HashSet;

use super::{DiagnosisSubmission, Identity, MessageError};

/// A submission Henry has matched to a clinical diagnosis. Only
/// [`HealthProvider::confirm`] constructs one, so Grace cannot be fed
/// self-declared infections.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CertifiedDiagnosis {
    blob: Vec<u8>,
}

impl CertifiedDiagnosis {
    pub(crate) fn blob(&self) -> &[u8] {
        &self.blob
    }

    pub fn wire_len(&self) -> usize {
        self.blob.len()
    }
}

/// Henry in the health-provider role: knows who tested positive, forwards
/// their encrypted upload and counts bytes. Never decrypts anything.
#[derive(Debug, Default)]
pub struct HealthProvider {
    positive: HashSet<Identity>,
    bytes_forwarded: u64,
}

impl HealthProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_positive_test(&mut self, patient: Identity) {
        self.positive.insert(patient);
    }

    /// Consumes the patient's pending diagnosis; a second upload for the
    /// same result is refused.
    pub fn confirm(
        &mut self,
        patient: Identity,
        submission: DiagnosisSubmission,
    ) -> Result<CertifiedDiagnosis, MessageError> {
        if !self.positive.remove(&patient) {
            return Err(MessageError::NotDiagnosed(patient));
        }
        let blob = submission.as_bytes().to_vec();
        self.bytes_forwarded += blob.len() as u64;
        Ok(CertifiedDiagnosis { blob })
    }

    pub fn bytes_forwarded(&self) -> u64 {
        self.bytes_forwarded
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn only_confirmed_patients_pass() {
        let mut henry = HealthProvider::new();
        let alice = Identity::from_index(1);
        let bob = Identity::from_index(2);
        henry.record_positive_test(alice);
        let sub = DiagnosisSubmission::from_bytes(vec![1, 2, 3]);
        assert_eq!(
            henry.confirm(bob, sub.clone()),
            Err(MessageError::NotDiagnosed(bob))
        );
        let cert = henry.confirm(alice, sub.clone()).unwrap();
        assert_eq!(cert.blob(), sub.as_bytes());
        assert_eq!(henry.bytes_forwarded(), 3);
        assert!(henry.confirm(alice, sub).is_err());
    }
}
