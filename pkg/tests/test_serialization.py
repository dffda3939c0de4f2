"""
Serialization Unit Tests

Tests map JSON documents, atomic writes and the CSV helpers.
Run with: pytest tests/test_serialization.py -v
"""

import json

import numpy as np
import pytest

from opf_distill.domain.models import DistillationMap, GroupMode, Method
from opf_distill.exceptions import CompatibilityError, ParseError
from opf_distill.serialization import (
    load_map,
    map_to_dict,
    parse_float_cell,
    parse_int_cell,
    read_csv_table,
    read_json,
    save_map,
    write_json_atomic,
)


@pytest.fixture
def gl2_map() -> DistillationMap:
    """GL2 map selecting features 0 and 2 of P = 4."""
    W = np.zeros((4, 4))
    W[:, 0] = [1.0, 0.1 / 3, -0.25, 1e-17]
    W[:, 2] = [0.0, 2.0 / 7, 1.0, np.pi]
    return DistillationMap.from_w(Method.GL2, W, [2, 0], lam=0.125, groups_mode=GroupMode.BUS, exact_k=False)


class TestMapDocuments:
    """Tests for map save/load."""

    def test_round_trip_bitwise(self, tmp_path, gl2_map):
        """Saved maps load back with bitwise-identical C."""
        path = tmp_path / "map.json"
        save_map(gl2_map, path)
        loaded = load_map(path)

        np.testing.assert_array_equal(loaded.c_matrix, gl2_map.c_matrix)
        np.testing.assert_array_equal(loaded.W, gl2_map.W)
        assert loaded.selected_indices == [0, 2]
        assert loaded.method == Method.GL2
        assert loaded.lam == 0.125
        assert loaded.groups_mode == GroupMode.BUS
        assert loaded.exact_k is False

    def test_document_fields(self, gl2_map):
        """The document carries the format version and row-major C."""
        doc = map_to_dict(gl2_map)
        assert doc["version"] == "1.0"
        assert doc["k"] == 2
        assert doc["p"] == 4
        assert len(doc["C"]) == 4 and len(doc["C"][0]) == 2

    def test_pca_map_round_trip(self, tmp_path):
        """PCA maps have no selection and a P×P projector."""
        projector = np.outer([0.6, 0.8], [0.6, 0.8])
        pca = DistillationMap(method=Method.PCA, k=1, selected_indices=[], c_matrix=projector, p=2)
        save_map(pca, tmp_path / "pca.json")
        loaded = load_map(tmp_path / "pca.json")
        assert loaded.selected_indices == []
        np.testing.assert_array_equal(loaded.W, projector)

    def test_empty_selection_round_trip(self, tmp_path):
        """A map that selected nothing reloads with a P×0 C."""
        empty = DistillationMap.from_w(Method.GL, np.zeros((3, 3)), [], lam=10.0)
        save_map(empty, tmp_path / "empty.json")
        loaded = load_map(tmp_path / "empty.json")
        assert loaded.c_matrix.shape == (3, 0)
        np.testing.assert_array_equal(loaded.W, np.zeros((3, 3)))

    def test_incompatible_version(self, tmp_path, gl2_map):
        doc = map_to_dict(gl2_map)
        doc["version"] = "9.9"
        write_json_atomic(doc, tmp_path / "map.json")
        with pytest.raises(CompatibilityError, match="incompatible map version"):
            load_map(tmp_path / "map.json")

    def test_missing_field(self, tmp_path, gl2_map):
        doc = map_to_dict(gl2_map)
        del doc["C"]
        write_json_atomic(doc, tmp_path / "map.json")
        with pytest.raises(ParseError, match="invalid map document"):
            load_map(tmp_path / "map.json")


class TestJson:
    """Tests for JSON helpers."""

    def test_numpy_values(self, tmp_path):
        """Numpy arrays and scalars are written as plain JSON."""
        path = tmp_path / "report.json"
        write_json_atomic({"a": np.arange(3), "b": np.float64(0.5), "c": np.bool_(True), "m": Method.BGL}, path)
        assert read_json(path) == {"a": [0, 1, 2], "b": 0.5, "c": True, "m": "bgl"}

    def test_no_temp_file_left(self, tmp_path):
        write_json_atomic({"x": 1}, tmp_path / "nested" / "out.json")
        assert [p.name for p in (tmp_path / "nested").iterdir()] == ["out.json"]

    def test_malformed_json(self, tmp_path):
        """Malformed JSON reports the line."""
        path = tmp_path / "bad.json"
        path.write_text('{\n  "a": 1,\n  oops\n}\n')
        with pytest.raises(ParseError) as excinfo:
            read_json(path)
        assert excinfo.value.line == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_json(tmp_path / "missing.json")

    def test_float_repr_round_trip(self, tmp_path):
        """Floats survive JSON exactly."""
        values = [0.1, 1 / 3, np.nextafter(1.0, 2.0), 1e-310]
        write_json_atomic(values, tmp_path / "f.json")
        assert read_json(tmp_path / "f.json") == values


class TestCsvTables:
    """Tests for CSV reading with comment lines and line numbers."""

    def test_line_numbers_skip_comments(self, tmp_path):
        """Data rows carry their physical line numbers."""
        path = tmp_path / "t.csv"
        path.write_text("# header comment\na,b\n1,2\n\n# mid\n3,4\n")
        df, lines = read_csv_table(path, ["a", "b"])
        assert df.shape == (2, 2)
        assert list(df["a"]) == ["1", "3"]
        assert lines == [3, 6]

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,c\n1,2\n")
        with pytest.raises(ParseError, match="missing columns"):
            read_csv_table(path, ["a", "b"])

    def test_too_many_fields(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b\n1,2\n3,4,5\n")
        with pytest.raises(ParseError, match="inconsistent column count"):
            read_csv_table(path, ["a", "b"])

    def test_empty_file(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("")
        with pytest.raises(ParseError, match="file is empty"):
            read_csv_table(path, ["a"])


class TestCellParsing:
    """Tests for single-cell parsing."""

    def test_float(self, tmp_path):
        assert parse_float_cell(" -0.25 ", tmp_path, 2, "r") == -0.25

    def test_empty_allowed(self, tmp_path):
        assert np.isnan(parse_float_cell("", tmp_path, 2, "r", allow_empty=True))

    @pytest.mark.parametrize(
        "text, message",
        [("", "empty cell"), ("abc", "non-numeric cell"), ("NaN", "non-finite cell"), ("inf", "non-finite cell")],
    )
    def test_float_errors(self, tmp_path, text, message):
        """Bad cells name line and column."""
        with pytest.raises(ParseError, match=message) as excinfo:
            parse_float_cell(text, tmp_path / "s.csv", 4, "t1")
        assert excinfo.value.line == 4
        assert excinfo.value.column == "t1"

    def test_int(self, tmp_path):
        assert parse_int_cell("12", tmp_path, 2, "bus_id") == 12

    def test_int_errors(self, tmp_path):
        with pytest.raises(ParseError, match="non-integer cell"):
            parse_int_cell("1.5", tmp_path, 2, "bus_id")
        with pytest.raises(ParseError, match="negative id"):
            parse_int_cell("-1", tmp_path, 2, "bus_id")


def test_map_json_is_plain(tmp_path, gl2_map):
    """Map files are ordinary JSON readable without this package."""
    save_map(gl2_map, tmp_path / "m.json")
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["method"] == "gl2"
    assert doc["selected_indices"] == [0, 2]
