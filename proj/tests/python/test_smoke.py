import json

import pytest

import udi_ecosystem as ue

T0 = 1767600000


def with_check_digit(body13):
    return body13 + str(ue.gtin_check_digit(body13))


def test_gtin_and_udi_round_trip():
    assert ue.gtin_check_digit("0400638133393") == 1
    text = "(01)" + with_check_digit("0400638133393") + "(11)250704(17)350704(10)LOT1(21)SN1"
    rec = ue.parse_udi(text)
    assert rec["serial"] == "SN1"
    assert ue.parse_udi(ue.format_udi(rec)) == rec
    with pytest.raises(ue.UdiError):
        ue.parse_udi("(01)04006381333930(21)SN1")


def test_codecs():
    assert ue.pharmacode_encode(3) == "B1 G2 B1"
    assert ue.pharmacode_decode(ue.pharmacode_encode(48287)) == 48287
    with pytest.raises(ue.UdiError) as err:
        ue.pharmacode_encode(2)
    assert err.value.code == "ValueOutOfRange"
    assert ue.code128_decode(ue.code128_encode("HC-0042")) == "HC-0042"
    matrix = ue.datamatrix_encode("123456")
    assert len(matrix) == 10
    assert ue.datamatrix_decode(matrix) == "123456"


def test_reed_solomon_reference_vector():
    data = bytes([142, 164, 186])
    assert list(ue.rs_encode(data, 5)) == [114, 25, 5, 88, 102]
    fixed, corrected = ue.rs_decode(bytes([142, 0, 186]), bytes([114, 25, 5, 88, 102]))
    assert fixed == data and corrected == 1


def test_readout_round_trip():
    params = {"blur_sigma_modules": 0.3, "noise_sigma_fraction": 0.05, "rng_seed": 3}
    samples = ue.synthesize_trace(ue.pharmacode_encode(48287), params)
    assert ue.decode_trace(samples, "pharmacode") == 48287
    assert ue.synthesize_trace(ue.pharmacode_encode(48287), params) == samples
    with pytest.raises(ue.UdiError):
        ue.decode_trace([0.2] * 300, "pharmacode")


def directory():
    return {
        "subjects": [
            {"subject_id": "pat-1", "role": "user", "scope": "P-1", "secret": "pw-1",
             "display_name": "Ada Example", "credential_id": "HC-1-9911"},
            {"subject_id": "dr-a", "role": "medical_staff", "secret": "pw-dr", "display_name": "Dr Staff"},
            {"subject_id": "prod-acme", "role": "producer", "scope": "Acme Orthopaedics", "secret": "pw-acme"},
            {"subject_id": "resp-1", "role": "first_responder", "secret": "pw-resp"},
        ]
    }


@pytest.fixture
def eco():
    e = ue.Ecosystem(config={"admin_secret": "admin"}, directory=directory(), clock_start=T0)
    mapping = {"source_name": "feed", "section": "technical_focus", "required_fields": [],
               "field_maps": [{"source": f, "canonical": f} for f in
                              ("udi", "manufacturer", "device_name", "material_lot", "revision_instruments",
                               "process_summary", "compatible_components", "surface_roughness_um")]}
    e.register_source({"source_name": "feed", "kind": "producer_feed", "mapping": mapping}, "admin")
    return e


def test_ecosystem_flow(eco):
    staff = eco.authenticate("dr-a", "pw-dr")
    producer = eco.authenticate("prod-acme", "pw-acme")
    udi = "(01)" + with_check_digit("0400638133393") + "(11)250704(17)350704(10)LOT1(21)SN1"
    feed = eco.ingest_producer_feed("feed", [{
        "udi": udi, "manufacturer": "Acme Orthopaedics", "device_name": "Hip stem", "material_lot": "M1",
        "revision_instruments": ["stem extractor"], "process_summary": "milled",
        "compatible_components": ["head 32"], "surface_roughness_um": 6.3}], producer)
    assert feed["applied"] == 1 and feed["results"][0]["procurement"] == "cleared"
    eco.put_patient("P-1", {"medical_focus": {"notes": "seen by Ada Example", "weight_kg": 70}}, staff)
    eco.link_implant(udi, "P-1", {"procedure": "THA"}, staff)

    user = eco.authenticate("pat-1", "pw-1")
    view = eco.federated_view("P-1", user)
    assert view["patient"]["patient_id"] == "P-1"
    assert [i["udi"] for i in view["implants"]] == [udi]

    with pytest.raises(ue.UdiError) as err:
        eco.federated_view("P-1", producer)
    assert err.value.code == "AccessDenied" and err.value.audit_seq is not None

    report = eco.surgeon_report("P-1", staff)
    assert report["document"]["implants"][0]["revision_instruments"] == ["stem extractor"]

    exported = json.dumps(eco.export_anonymized({}, "k1", staff))
    assert "Ada Example" not in exported and "HC-1-9911" not in exported

    assert eco.verify_audit()["ok"]
    log = eco.audit_log()
    assert ue.verify_audit_chain(log)["ok"]
    tampered = log.replace('"decision":"deny"', '"decision":"allow"', 1)
    assert tampered != log
    assert not ue.verify_audit_chain(tampered)["ok"]


def test_emergency_grant(eco):
    user = eco.authenticate("pat-1", "pw-1")
    staff = eco.authenticate("dr-a", "pw-dr")
    eco.put_patient("P-1", {"medical_focus": {"notes": "x"}}, staff)
    watch = eco.device_capability(user, "watch-1")
    eco.ingest_vitals("P-1", f"{T0 - 20},SpO2,84\n{T0},systolic,72\n", watch)
    responder = eco.authenticate("resp-1", "pw-resp")
    grant = eco.evaluate_emergency("P-1", responder)
    assert grant is not None
    assert eco.federated_view("P-1", responder)["patient"]["medical"]["notes"] == "x"


@pytest.mark.parametrize("name", ["implant", "revision", "emergency"])
def test_scenarios_succeed(name):
    report = ue.run_scenario(name, seed=7)
    assert report["exit_code"] == 0
    assert ue.run_scenario(name, seed=7) == report
