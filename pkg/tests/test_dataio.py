import struct

import numpy as np
import pytest

from embadapt.dataio import (
    BenchmarkManifest,
    EmbeddingDataset,
    VideoRecord,
    align_by_id,
    load_embeddings,
    load_label_sidecar,
    load_manifest,
    load_text_bank,
    resolve_labels,
    save_embeddings,
    save_label_sidecar,
    save_manifest,
    save_text_bank,
)
from embadapt.errors import (
    BadMagic,
    ClassCountMismatch,
    DataFormatError,
    DuplicateVideoId,
    IdSetMismatch,
    MissingLabels,
    NonFiniteValue,
    NonUnitRow,
    TruncatedFile,
    ZeroFrames,
)
from embadapt.textspace import TextBank


def rng(seed=0):
    return np.random.Generator(np.random.Philox(key=seed))


def make_dataset(seed=0, n=6, d=8, labeled=True):
    g = rng(seed)
    videos = []
    for i in range(n):
        k = int(g.integers(1, 5))
        frames = g.standard_normal((k, d)).astype(np.float32).astype(np.float64)
        videos.append(VideoRecord(video_id=f"vid_{i:03d}",
                                  label=int(g.integers(4)) if labeled else -1,
                                  frames=frames))
    return EmbeddingDataset(embedding_dim=d, videos=videos)


def make_bank(seed=0, C=3, T=2, d=8, tau=0.05):
    g = rng(seed)
    emb = g.standard_normal((C, T, d))
    emb /= np.linalg.norm(emb, axis=2, keepdims=True)
    # store at float32 precision so the save/load round trip is exact
    emb = emb.astype(np.float32).astype(np.float64)
    return TextBank(
        class_names=tuple(f"class {c}" for c in range(C)),
        templates=tuple(f"a photo of [CLS] number {t}" for t in range(T)),
        embeddings=emb,
        logit_temperature=tau,
    )


class TestEmbeddingsFormat:
    def test_round_trip(self, tmp_path):
        ds = make_dataset(seed=1)
        path = tmp_path / "d.emb"
        save_embeddings(ds, path)
        out = load_embeddings(path, space_tag="teacher")
        assert out.embedding_dim == ds.embedding_dim
        assert out.video_ids() == ds.video_ids()
        for a, b in zip(ds.videos, out.videos):
            assert a.label == b.label
            # payload is float32 on disk; inputs are float32-exact
            assert np.array_equal(a.frames, b.frames)

    def test_save_is_deterministic(self, tmp_path):
        ds = make_dataset(seed=2)
        p1, p2 = tmp_path / "a.emb", tmp_path / "b.emb"
        save_embeddings(ds, p1)
        save_embeddings(ds, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_layout(self, tmp_path):
        ds = make_dataset(seed=3, n=4, d=16)
        path = tmp_path / "d.emb"
        save_embeddings(ds, path)
        blob = path.read_bytes()
        assert blob[:4] == b"EMB1"
        version, dim, count = struct.unpack_from("<III", blob, 4)
        assert (version, dim, count) == (1, 16, 4)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.emb"
        path.write_bytes(b"XXXX" + b"\x00" * 12)
        with pytest.raises(BadMagic):
            load_embeddings(path)

    def test_truncated(self, tmp_path):
        ds = make_dataset(seed=4)
        path = tmp_path / "d.emb"
        save_embeddings(ds, path)
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(TruncatedFile):
            load_embeddings(path)

    def test_trailing_bytes(self, tmp_path):
        ds = make_dataset(seed=5)
        path = tmp_path / "d.emb"
        save_embeddings(ds, path)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(DataFormatError):
            load_embeddings(path)

    def test_duplicate_video_id(self, tmp_path):
        frames = np.ones((2, 4))
        ds = EmbeddingDataset(4, [VideoRecord("same", 0, frames),
                                  VideoRecord("same", 1, frames)])
        path = tmp_path / "d.emb"
        save_embeddings(ds, path)
        with pytest.raises(DuplicateVideoId):
            load_embeddings(path)

    def test_zero_frames(self, tmp_path):
        ds = EmbeddingDataset(4, [VideoRecord("v", 0, np.zeros((0, 4)))])
        path = tmp_path / "d.emb"
        save_embeddings(ds, path)
        with pytest.raises(ZeroFrames):
            load_embeddings(path)

    def test_nonfinite_frames(self, tmp_path):
        frames = np.ones((1, 4))
        frames[0, 2] = np.nan
        ds = EmbeddingDataset(4, [VideoRecord("v", 0, frames)])
        path = tmp_path / "d.emb"
        save_embeddings(ds, path)
        with pytest.raises(NonFiniteValue):
            load_embeddings(path)


class TestTextBankFormat:
    def test_round_trip(self, tmp_path):
        bank = make_bank(seed=6)
        path = tmp_path / "b.txb"
        save_text_bank(bank, path)
        out = load_text_bank(path)
        assert out.class_names == bank.class_names
        assert out.templates == bank.templates
        assert out.logit_temperature == bank.logit_temperature
        assert np.array_equal(out.embeddings, bank.embeddings)

    def test_header_layout(self, tmp_path):
        bank = make_bank(seed=7, C=5, T=3, d=12, tau=0.25)
        path = tmp_path / "b.txb"
        save_text_bank(bank, path)
        blob = path.read_bytes()
        assert blob[:4] == b"TXB1"
        version, d, c, t, tau = struct.unpack_from("<IIIId", blob, 4)
        assert (version, d, c, t) == (1, 12, 5, 3)
        assert tau == 0.25

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "b.txb"
        path.write_bytes(b"EMB1" + b"\x00" * 24)
        with pytest.raises(BadMagic):
            load_text_bank(path)

    def test_single_class_rejected(self, tmp_path):
        bank = make_bank(C=2)
        path = tmp_path / "b.txb"
        save_text_bank(bank, path)
        blob = bytearray(path.read_bytes())
        struct.pack_into("<I", blob, 12, 1)  # claim C=1
        path.write_bytes(bytes(blob))
        with pytest.raises(ClassCountMismatch):
            load_text_bank(path)

    def test_non_unit_rows_rejected(self, tmp_path):
        bank = make_bank(seed=8)
        scaled = TextBank(bank.class_names, bank.templates,
                          bank.embeddings * 1.5, bank.logit_temperature)
        path = tmp_path / "b.txb"
        save_text_bank(scaled, path)
        with pytest.raises(NonUnitRow):
            load_text_bank(path)

    def test_truncated(self, tmp_path):
        bank = make_bank(seed=9)
        path = tmp_path / "b.txb"
        save_text_bank(bank, path)
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(TruncatedFile):
            load_text_bank(path)


class TestManifest:
    def test_round_trip(self, tmp_path):
        manifest = BenchmarkManifest(
            class_names=["run", "jump"],
            template_strings=["a video of [CLS]"],
            logit_temperature=0.05,
            files={"source_teacher": "source_teacher.emb",
                   "bank_teacher": "bank_teacher.txb"},
        )
        path = tmp_path / "manifest.json"
        save_manifest(manifest, path)
        out = load_manifest(path)
        assert out.class_names == manifest.class_names
        assert out.template_strings == manifest.template_strings
        assert out.logit_temperature == manifest.logit_temperature
        assert out.files == manifest.files

    def test_missing_key(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text('{"class_names": []}')
        with pytest.raises(DataFormatError):
            load_manifest(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text("{not json")
        with pytest.raises(DataFormatError):
            load_manifest(path)


class TestAlignById:
    def test_sorts_matching_sets(self):
        a = make_dataset(seed=10, n=5)
        shuffled = EmbeddingDataset(a.embedding_dim,
                                    [a.videos[i] for i in (3, 0, 4, 1, 2)])
        out_a, out_b = align_by_id(a, shuffled)
        expected = sorted(a.video_ids())
        assert out_a.video_ids() == expected
        assert out_b.video_ids() == expected
        for va, vb in zip(out_a.videos, out_b.videos):
            assert va.video_id == vb.video_id

    def test_idempotent(self):
        a = make_dataset(seed=11)
        once_a, once_b = align_by_id(a, a)
        twice_a, twice_b = align_by_id(once_a, once_b)
        assert once_a.video_ids() == twice_a.video_ids()

    def test_mismatch_names_offenders(self):
        a = make_dataset(seed=12, n=4)
        b = EmbeddingDataset(a.embedding_dim, a.videos[:3])
        with pytest.raises(IdSetMismatch) as err:
            align_by_id(a, b)
        assert a.videos[3].video_id in str(err.value)


class TestLabels:
    def test_sidecar_round_trip(self, tmp_path):
        labels = {"v2": 1, "v0": 3, "v1": 0}
        path = tmp_path / "labels.csv"
        save_label_sidecar(labels, path)
        assert load_label_sidecar(path) == labels
        # sorted id order on disk
        lines = path.read_text().splitlines()
        assert lines[1].startswith("v0,")

    def test_resolve_prefers_dataset_labels(self):
        ds = make_dataset(seed=13, labeled=True)
        sidecar = {v.video_id: 99 for v in ds.videos}
        assert resolve_labels(ds, sidecar) == [v.label for v in ds.videos]

    def test_resolve_falls_back_to_sidecar(self):
        ds = make_dataset(seed=14, labeled=False)
        sidecar = {v.video_id: i % 3 for i, v in enumerate(ds.videos)}
        assert resolve_labels(ds, sidecar) == [i % 3 for i in range(len(ds))]

    def test_resolve_missing_raises(self):
        ds = make_dataset(seed=15, labeled=False)
        with pytest.raises(MissingLabels):
            resolve_labels(ds)
        with pytest.raises(MissingLabels):
            resolve_labels(ds, {ds.videos[0].video_id: 1})
