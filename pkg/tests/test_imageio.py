import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from mrcteval.errors import ImageError, ManifestError
from mrcteval.imageio import (
    CATEGORIES,
    EvalManifest,
    ImagePlane,
    PairRecord,
    load_image,
    load_manifest,
    to_luma,
)

from conftest import write_png


class TestImagePlane:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ImageError):
            ImagePlane(width=2, height=3, pixels=np.zeros((2, 2)))

    def test_out_of_range_rejected(self):
        with pytest.raises(ImageError):
            ImagePlane.from_array(np.full((2, 2), 256.0))
        with pytest.raises(ImageError):
            ImagePlane.from_array(np.full((2, 2), -1.0))

    def test_nonpositive_dims_rejected(self):
        with pytest.raises(ImageError):
            ImagePlane(width=0, height=1, pixels=np.zeros((1, 0)))


class TestLoadImage:
    def test_grayscale_256(self, tmp_path):
        rng = np.random.default_rng(0)
        arr = rng.integers(0, 256, (256, 256))
        path = write_png(tmp_path / "g.png", arr)
        img = load_image(path)
        assert (img.width, img.height, img.range_r) == (256, 256, 255.0)
        assert np.array_equal(img.pixels, arr.astype(np.float64))

    def test_single_black_pixel(self, tmp_path):
        path = write_png(tmp_path / "p.png", np.zeros((1, 1)))
        img = load_image(path)
        assert img.width == img.height == 1
        assert img.pixels[0, 0] == 0.0

    def test_rgb_collapses_to_luma(self, tmp_path):
        arr = np.zeros((4, 4, 3), dtype=np.uint8)
        arr[..., 0] = 255  # pure red
        path = tmp_path / "rgb.png"
        Image.fromarray(arr, mode="RGB").save(path)
        img = load_image(path)
        assert img.pixels[0, 0] == pytest.approx(76.245, abs=1e-9)

    def test_sixteen_bit_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(path)
        with pytest.raises(ImageError, match="bit depth"):
            load_image(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ImageError, match="not found"):
            load_image(tmp_path / "absent.png")

    def test_corrupt_png(self, tmp_path):
        path = tmp_path / "bad.png"
        path.write_bytes(b"\x89PNG\r\n\x1a\nnot really a png")
        with pytest.raises(ImageError):
            load_image(path)

    def test_non_png_rejected(self, tmp_path):
        path = tmp_path / "j.jpg"
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(path, format="JPEG")
        with pytest.raises(ImageError, match="not a PNG"):
            load_image(path)

    def test_round_trip_is_pixel_identical(self, tmp_path):
        rng = np.random.default_rng(3)
        arr = rng.integers(0, 256, (32, 32))
        first = load_image(write_png(tmp_path / "a.png", arr))
        second = load_image(write_png(tmp_path / "b.png", first.pixels))
        assert np.array_equal(first.pixels, second.pixels)


class TestToLuma:
    def test_white(self):
        assert to_luma(255, 255, 255) == pytest.approx(255.0, abs=1e-12)

    def test_black(self):
        assert to_luma(0, 0, 0) == 0.0

    def test_pure_red(self):
        assert to_luma(255, 0, 0) == pytest.approx(76.245, abs=1e-12)

    @given(
        st.floats(0, 255), st.floats(0, 255), st.floats(0, 255),
        st.floats(0.0, 10.0),
    )
    def test_bounded_and_monotone(self, r, g, b, bump):
        v = to_luma(r, g, b)
        assert 0.0 <= v <= 255.0 + 1e-9
        assert to_luma(min(r + bump, 255), g, b) >= v - 1e-12


class TestManifest:
    header = "model_id,category,direction,generated_path,reference_path,subject_id\n"

    def write(self, tmp_path, rows, header=None):
        path = tmp_path / "manifest.csv"
        path.write_text((header or self.header) + "".join(rows), encoding="utf-8")
        return path

    def test_happy_path_preserves_order(self, tmp_path):
        rows = [
            "m1,Photography,MR2CT,gen1.png,ref1.png,s1\n",
            "m1,Photography,CT2MR,gen2.png,ref2.png,s1\n",
        ]
        manifest = load_manifest(self.write(tmp_path, rows))
        assert len(manifest) == 2
        assert [r.direction for r in manifest.records] == ["MR2CT", "CT2MR"]

    def test_crlf_accepted(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_bytes(
            b"model_id,category,direction,generated_path,reference_path\r\n"
            b"m1,,MR2CT,a.png,b.png\r\n"
        )
        assert len(load_manifest(path)) == 1

    def test_unknown_direction(self, tmp_path):
        path = self.write(tmp_path, ["m1,,CT2PET,a.png,b.png,\n"])
        with pytest.raises(ManifestError, match="unknown direction"):
            load_manifest(path)

    def test_unknown_category(self, tmp_path):
        path = self.write(tmp_path, ["m1,Cartoons,MR2CT,a.png,b.png,\n"])
        with pytest.raises(ManifestError, match="unknown category"):
            load_manifest(path)

    def test_duplicate_triple(self, tmp_path):
        rows = [
            "m,Photography,MR2CT,a.png,b.png,\n",
            "m,Photography,MR2CT,a.png,c.png,\n",
        ]
        with pytest.raises(ManifestError, match="duplicate pair"):
            load_manifest(self.write(tmp_path, rows))

    def test_missing_column(self, tmp_path):
        path = self.write(
            tmp_path,
            ["m,MR2CT,a.png,b.png\n"],
            header="model_id,direction,generated_path,reference_path\n",
        )
        with pytest.raises(ManifestError, match="missing required column"):
            load_manifest(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ManifestError, match="empty"):
            load_manifest(path)

    def test_all_categories_accepted(self, tmp_path):
        rows = [
            f"m{i},{cat},MR2CT,g{i}.png,r{i}.png,\n" for i, cat in enumerate(CATEGORIES)
        ]
        manifest = load_manifest(self.write(tmp_path, rows))
        assert [r.category for r in manifest.records] == list(CATEGORIES)

    def test_duplicate_guard_in_type(self):
        rec = PairRecord("m", "", "MR2CT", "a.png", "b.png")
        with pytest.raises(ManifestError):
            EvalManifest(records=(rec, rec))
