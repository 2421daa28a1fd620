"""Reference estimates for the three flight records.

Used as the truth when simulating desk-scale validation data.  Q and R are
diagonal and stored here scaled by 1e6.
"""
import numpy as np

from .aircraft import CaseId

# (estimate, standard deviation) per parameter, layout order.
THETA_REF = {
    CaseId.Case1Longitudinal: np.array([
        (4.6469, 0.0179), (0.0555, 0.0277), (0.0162, 0.0032), (-0.5468, 0.0093),
        (-19.8027, 0.6692), (-1.1229, 0.0218), (-0.0495, 0.0012), (0.0007, 0.0021),
        (0.2195, 0.0014), (-0.1398, 0.0153), (-3.2088, 0.1702), (-0.0651, 0.0134),
        (-0.0155, 0.0007),
    ]),
    CaseId.Case2Longitudinal: np.array([
        (4.9235, 0.0164), (0.1554, 0.0271), (0.2409, 0.0021), (-0.5293, 0.0079),
        (-11.8596, 0.2402), (-6.8959, 0.4891), (-0.9731, 0.0177), (-0.0425, 0.0009),
        (0.0003, 0.0021), (0.2538, 0.0014),
    ]),
    CaseId.Case3Lateral: np.array([
        (-0.4579, 0.0043), (0.1040, 0.0067), (-0.0143, 0.0048), (-0.0168, 0.0005),
        (-0.3100, 0.0028), (0.0740, 0.0030), (0.0557, 0.0004), (0.0072, 0.0007),
        (-0.0020, 0.0001), (0.0018, 0.0027), (0.0656, 0.0005), (-0.0429, 0.0031),
        (-0.0880, 0.0033), (0.0004, 0.0005), (-0.0478, 0.0008), (0.0067, 0.0001),
        (-0.0259, 0.0008), (-0.2828, 0.0327), (0.2224, 0.0281), (0.0384, 0.0047),
    ]),
}

R_REF = {
    CaseId.Case1Longitudinal: np.array([0.49, 0.04, 0.40, 15.98, 17.70]) * 1e-6,
    CaseId.Case2Longitudinal: np.array([1.241, 0.051, 0.460, 5.668]) * 1e-6,
    CaseId.Case3Lateral: np.array([0.0871, 0.0623, 0.2255, 0.0200, 43.8064]) * 1e-6,
}

Q_REF = {
    CaseId.Case1Longitudinal: np.array([0.134, 2.287, 1.204]) * 1e-6,
    CaseId.Case2Longitudinal: np.array([0.180, 2.954, 2.646]) * 1e-6,
    CaseId.Case3Lateral: np.array([4.2163, 5.1340, 4.9426, 1.4324]) * 1e-6,
}

J_REF = {
    CaseId.Case1Longitudinal: np.array([4.4752, 5.1532, 4.6432, 0.0004, -56.2206, 2.9551, 2.9303, 2.5161]),
    CaseId.Case2Longitudinal: np.array([3.9336, 4.2225, 3.6162, 0.0008, -44.1347, 2.9752, 2.9760, 2.9070]),
    CaseId.Case3Lateral: np.array([4.7650, 4.8321, 3.5272, 0.0004, -55.0111, 3.9673, 3.9669, 3.8171]),
}

# Comparison columns for case 1 (Myers-Tapley and Mohamed-Schwarz runs).
R_MT_CASE1 = np.array([0.4107, 0.0312, 3.9381, 94.5086, 26.3511]) * 1e-6
Q_MT_CASE1 = np.array([0.0393, 2.6418, 0.3231]) * 1e-6
R_MS_CASE1 = np.array([3.2046, 37.6770, 7.5509, 198.2716, 28.9841]) * 1e-6
Q_MS_CASE1 = np.array([0.0001, 0.0015, 0.3456]) * 1e-6


def theta_ref(case):
    return THETA_REF[CaseId(case) if not isinstance(case, CaseId) else case][:, 0].copy()


def sigma_ref(case):
    return THETA_REF[CaseId(case) if not isinstance(case, CaseId) else case][:, 1].copy()
