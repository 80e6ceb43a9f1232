"""Tests for synthetic-market generation."""

import json

import numpy as np
import pytest

from facmarket import data, productivity, synth
from facmarket.errors import DataError


@pytest.fixture(scope="module")
def small():
    spec = synth.SyntheticSpec(n_institutions=12, start_year=2000,
                               end_year=2006, hires_per_year=8.0, n_topics=3)
    return spec, synth.generate(spec, seed=7)


class TestSpecValidation:
    def test_one_institution_rejected(self):
        with pytest.raises(DataError):
            synth.SyntheticSpec(n_institutions=1)

    def test_reversed_years_rejected(self):
        with pytest.raises(DataError):
            synth.SyntheticSpec(start_year=2005, end_year=2000)

    def test_zero_hires_rejected(self):
        with pytest.raises(DataError):
            synth.SyntheticSpec(hires_per_year=0.0)

    def test_bad_probability_rejected(self):
        with pytest.raises(DataError):
            synth.SyntheticSpec(female_fraction_start=1.5)

    def test_female_fraction_ramp_endpoints(self):
        spec = synth.SyntheticSpec(start_year=1990, end_year=2000,
                                   female_fraction_start=0.1,
                                   female_fraction_end=0.3)
        assert spec.female_fraction(1990) == pytest.approx(0.1)
        assert spec.female_fraction(2000) == pytest.approx(0.3)
        assert spec.female_fraction(1995) == pytest.approx(0.2)


class TestGenerate:
    def test_truth_matches_records(self, small):
        _, d = small
        assert set(d.truth["candidates"]) == {r.id for r in d.records}
        for r in d.records:
            t = d.truth["candidates"][r.id]
            assert t["hiring_institution"] == r.hiring_institution
            assert t["gender"] == r.gender

    def test_placements_follow_openings(self, small):
        # Every hire fills a real opening from that year's slate.
        spec, d = small
        net = data.build_network(d.records, d.institutions)
        for my in data.year_slices(net):
            assert len(my.candidates) == len(my.openings)

    def test_planted_ranking_covers_all_institutions(self, small):
        spec, d = small
        assert sorted(d.ranking.rank) == sorted(i.id for i in d.institutions)
        assert sorted(d.ranking.rank.values()) == \
            list(np.arange(1, spec.n_institutions + 1, dtype=float))

    def test_violation_fraction_consistent(self, small):
        _, d = small
        viol = sum(1 for r in d.records
                   if r.doctoral_institution != r.hiring_institution
                   and d.ranking.rank[r.hiring_institution]
                   < d.ranking.rank[r.doctoral_institution])
        non_self = sum(1 for r in d.records
                       if r.doctoral_institution != r.hiring_institution)
        assert d.ranking.violation_fraction == pytest.approx(viol / non_self)

    def test_every_year_has_at_least_one_hire(self, small):
        spec, d = small
        assert {r.hire_year for r in d.records} == set(spec.years)

    def test_publication_counts_match(self, small):
        _, d = small
        for r in d.records:
            assert len(d.publications.get(r.id, [])) == r.pub_count

    def test_determinism(self):
        spec = synth.SyntheticSpec(n_institutions=6, start_year=2000,
                                   end_year=2002, hires_per_year=4.0,
                                   n_topics=2)
        a = synth.generate(spec, seed=3)
        b = synth.generate(spec, seed=3)
        assert a.records == b.records
        assert a.truth == b.truth

    def test_seed_changes_output(self):
        spec = synth.SyntheticSpec(n_institutions=6, start_year=2000,
                                   end_year=2002, hires_per_year=4.0,
                                   n_topics=2)
        a = synth.generate(spec, seed=3)
        b = synth.generate(spec, seed=4)
        assert a.records != b.records

    def test_female_fraction_ramp_observed(self):
        # Generous market so the binomial check has power.
        spec = synth.SyntheticSpec(n_institutions=10, start_year=2000,
                                   end_year=2000, hires_per_year=600.0,
                                   female_fraction_start=0.3,
                                   female_fraction_end=0.3, n_topics=2)
        d = synth.generate(spec, seed=1)
        n = len(d.records)
        k = sum(r.gender == "F" for r in d.records)
        sd = np.sqrt(n * 0.3 * 0.7)
        assert abs(k - 0.3 * n) < 4 * sd


class TestWriteBundle:
    def test_roundtrip_through_loaders(self, small, tmp_path):
        _, d = small
        paths = synth.write_bundle(d, tmp_path)
        insts = data.load_institutions(paths["institutions"])
        recs = data.load_faculty(paths["faculty"], insts)
        assert sorted(i.id for i in insts) == \
            sorted(i.id for i in d.institutions)
        by_id = {r.id: r for r in recs}
        for r in d.records:
            got = by_id[r.id]
            assert got.hiring_institution == r.hiring_institution
            assert got.gender == r.gender
            assert got.postdoc == r.postdoc
        truth = json.loads(paths["truth"].read_text())
        assert truth["w_true"] == list(d.truth["w_true"])

    def test_publications_file_loadable(self, small, tmp_path):
        _, d = small
        paths = synth.write_bundle(d, tmp_path)
        pubs = productivity.load_publications(paths["publications"])
        for r in d.records:
            assert len(pubs.get(r.id, [])) == r.pub_count


class TestFullScaleSpec:
    def test_shape(self):
        spec = synth.full_scale_spec()
        assert spec.n_institutions == 205
        assert len(list(spec.years)) == 42
        assert spec.w_true[0] > 0
