"""Tests for the teacher and student models and the checkpoint container."""

import json
import struct

import numpy as np
import pytest

from vickd.errors import ConfigError, FormatError, ShapeError
from vickd.models import (
    PARAM_BUDGET,
    STUDENT_PRESETS,
    Student,
    Teacher,
    build_model,
    checkpoint_meta,
    load_checkpoint,
    read_tensors,
    save_checkpoint,
    write_tensors,
)
from vickd.models.checkpoint import MAGIC, decode_tensors, encode_tensors, sidecar_path
from vickd.tensor import backward, ops
from vickd.types import ModelRole


# ===========================================================================
# models
# ===========================================================================


class TestStudent:
    def test_forward_shapes(self, tiny_student, rng):
        x = rng.normal(size=(3, 400)).astype(np.float32)
        h, y, z = tiny_student.forward(x, with_projection=True)
        assert h.shape == (3, 48)
        assert y.shape == (3, 4)
        assert z.shape == (3, 16)

    def test_projection_only_on_request(self, tiny_student, rng):
        _, _, z = tiny_student(rng.normal(size=(2, 400)))
        assert z is None

    def test_logits_match_forward(self, tiny_student, rng):
        x = rng.normal(size=(2, 400))
        np.testing.assert_array_equal(tiny_student.logits(x).data, tiny_student(x)[1].data)

    def test_wrong_length_rejected(self, tiny_student):
        with pytest.raises(ShapeError, match="expected"):
            tiny_student.logits(np.zeros((2, 300)))

    @pytest.mark.parametrize("preset", sorted(STUDENT_PRESETS))
    def test_presets_fit_budget(self, make_spec, preset):
        student = Student(make_spec(preset=preset, classes=35, d_t=64))
        assert student.encoder_parameters() <= PARAM_BUDGET
        assert student.num_parameters() > student.encoder_parameters()

    def test_unknown_preset(self, make_spec):
        with pytest.raises(ConfigError, match="unknown student preset"):
            Student(make_spec(preset="resnet-huge"))

    def test_same_seed_same_weights(self, make_spec):
        a, b = Student(make_spec(seed=7)), Student(make_spec(seed=7))
        for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
            assert na == nb
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_rebuild_projection(self, tiny_student, rng):
        tiny_student.rebuild_projection(32, seed=1)
        assert tiny_student.spec.d_t == 32
        _, _, z = tiny_student.forward(rng.normal(size=(2, 400)), with_projection=True)
        assert z.shape == (2, 32)

    def test_every_parameter_gets_gradient(self, tiny_student, rng):
        _, y, z = tiny_student.forward(rng.normal(size=(4, 400)), with_projection=True)
        backward(ops.mean(ops.square(y)) + ops.mean(ops.square(z)))
        missing = [n for n, p in tiny_student.named_parameters() if p.grad is None]
        assert missing == []


class TestTeacher:
    def test_forward_shapes(self, tiny_teacher, rng):
        z, logits = tiny_teacher(rng.normal(size=(3, 400)))
        assert z.shape == (3, 16)
        assert logits.shape == (3, 4)

    def test_embed_matches_forward(self, tiny_teacher, rng):
        x = rng.normal(size=(2, 400))
        np.testing.assert_allclose(tiny_teacher.embed(x).data, tiny_teacher(x)[0].data)

    def test_layer_weights_sum_to_one(self, tiny_teacher):
        w = tiny_teacher.encoder.layer_weights().data
        assert w.shape == (6,)
        assert w.sum() == pytest.approx(1.0, abs=1e-6)

    def test_unknown_preset(self, make_spec):
        with pytest.raises(ConfigError, match="unknown teacher preset"):
            Teacher(make_spec(role=ModelRole.teacher, preset="wav2vec"))

    def test_larger_than_students(self, make_spec):
        teacher = Teacher(make_spec(role=ModelRole.teacher, d_t=64, classes=12))
        for preset in STUDENT_PRESETS:
            assert teacher.num_parameters() > Student(make_spec(preset=preset, classes=12)).encoder_parameters()

    def test_default_size(self, make_spec):
        teacher = Teacher(make_spec(role=ModelRole.teacher, d_t=64, classes=12))
        student = Student(make_spec(classes=12))
        assert teacher.num_parameters() == 84_210
        assert teacher.num_parameters() >= 3 * student.encoder_parameters()

    def test_build_model_dispatches_on_role(self, make_spec):
        assert isinstance(build_model(make_spec(role=ModelRole.teacher)), Teacher)
        assert isinstance(build_model(make_spec()), Student)


# ===========================================================================
# checkpoint container
# ===========================================================================


class TestContainer:
    def test_layout(self):
        buf = encode_tensors({"a": np.array([1.0, 2.0])})
        assert buf[:8] == MAGIC
        # magic, version, count, name_len, name, rank, one dim, two f32
        assert len(buf) == 8 + 4 + 4 + 4 + 1 + 4 + 4 + 8

    def test_scalar_and_empty_names(self, tmp_path):
        path = write_tensors(tmp_path / "t.bin", {"": np.ones((2, 0)), "s": np.array(3.0)})
        out = read_tensors(path)
        assert out[""].shape == (2, 0)
        assert out["s"].shape == () and float(out["s"]) == 3.0

    def test_bad_magic(self):
        buf = encode_tensors({"a": np.ones(2)})
        with pytest.raises(FormatError, match="magic"):
            decode_tensors(b"XXXXXXXX" + buf[8:])

    def test_truncated(self):
        buf = encode_tensors({"a": np.ones(4)})
        with pytest.raises(FormatError):
            decode_tensors(buf[:-3])

    def test_trailing_bytes(self):
        with pytest.raises(FormatError, match="trailing"):
            decode_tensors(encode_tensors({"a": np.ones(2)}) + b"\0")

    def test_huge_dims_rejected_before_allocation(self):
        buf = bytearray(encode_tensors({"a": np.ones(1)}))
        # dim field sits after magic, version, count, name_len, name and rank
        buf[8 + 4 + 4 + 4 + 1 + 4:8 + 4 + 4 + 4 + 1 + 8] = (0xFFFFFFF0).to_bytes(4, "little")
        with pytest.raises(FormatError, match="overflow"):
            decode_tensors(bytes(buf))

    def test_dims_product_beyond_int64(self):
        name = b"w"
        header = MAGIC + struct.pack("<III", 1, 1, len(name)) + name + struct.pack("<I", 4)
        buf = header + struct.pack("<4I", *(65536,) * 4) + b"\0" * 16
        with pytest.raises(FormatError, match="overflow"):
            decode_tensors(buf)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError, match="cannot read"):
            read_tensors(tmp_path / "nope.bin")


class TestCheckpoint:
    def test_student_round_trip(self, tiny_student, tmp_path, rng):
        path = save_checkpoint(tiny_student, tmp_path / "s.ckpt", meta={"recipe": "vic_kd"})
        loaded = load_checkpoint(path)
        assert isinstance(loaded, Student)
        assert loaded.spec == tiny_student.spec
        x = rng.normal(size=(2, 400))
        np.testing.assert_array_equal(loaded.logits(x).data, tiny_student.logits(x).data)
        assert checkpoint_meta(path) == {"recipe": "vic_kd"}

    def test_teacher_round_trip(self, tiny_teacher, tmp_path):
        loaded = load_checkpoint(save_checkpoint(tiny_teacher, tmp_path / "t.ckpt"))
        assert isinstance(loaded, Teacher)
        np.testing.assert_array_equal(
            loaded.encoder.layer_logits.data, tiny_teacher.encoder.layer_logits.data
        )

    def test_missing_sidecar(self, tiny_student, tmp_path):
        path = save_checkpoint(tiny_student, tmp_path / "s.ckpt")
        sidecar_path(path).unlink()
        with pytest.raises(FormatError, match="sidecar"):
            load_checkpoint(path)

    def test_mismatched_tensors(self, tiny_student, tmp_path):
        path = save_checkpoint(tiny_student, tmp_path / "s.ckpt")
        record = json.loads(sidecar_path(path).read_text())
        record["model"]["classes"] = 7
        sidecar_path(path).write_text(json.dumps(record))
        with pytest.raises(FormatError, match="shape"):
            load_checkpoint(path)
