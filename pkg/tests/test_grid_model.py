"""Topology assembly checked against small networks worked out by hand."""

import numpy as np
import pytest

from gridshield.grid_model import (
    Branch,
    Bus,
    CaseParseError,
    GridNetwork,
    StructuralError,
    base_injections,
    build_topology,
    dc_power_flow,
    geodesic_distances,
    initial_state,
    load_case,
    measure,
    network_to_json,
    parse_case_file,
    reduced_laplacian,
)
from gridshield.cases import case_path


def four_bus():
    """Path network 1-2-3-4: slack, generator, then two load buses."""
    return GridNetwork(
        buses=(
            Bus(1, "slack", 0.0),
            Bus(2, "generator", 0.0),
            Bus(3, "load", 40.0),
            Bus(4, "load", 60.0),
        ),
        branches=(
            Branch(1, 2, 1.0),
            Branch(2, 3, 2.0),
            Branch(3, 4, 5.0),
        ),
        base_mva=100.0,
    )


def three_bus():
    return GridNetwork(
        buses=(
            Bus(1, "slack", 0.0),
            Bus(2, "load", 30.0),
            Bus(3, "load", 20.0),
        ),
        branches=(
            Branch(1, 2, 2.0),
            Branch(2, 3, 4.0),
        ),
        base_mva=100.0,
    )


class TestBuildTopology:
    def test_four_bus_matrix_matches_hand_derivation(self):
        topo = build_topology(four_bus())
        expected = np.array(
            [
                # injection rows, bus order
                [-1.0, 0.0, 0.0],
                [3.0, -2.0, 0.0],
                [-2.0, 7.0, -5.0],
                [0.0, -5.0, 5.0],
                # flow rows, branch order
                [-1.0, 0.0, 0.0],
                [2.0, -2.0, 0.0],
                [0.0, 5.0, -5.0],
            ]
        )
        np.testing.assert_array_equal(topo.h, expected)

    def test_four_bus_bookkeeping(self):
        topo = build_topology(four_bus())
        assert topo.col_map == (2, 3, 4)
        assert list(topo.load_rows) == [2, 3]
        assert topo.row_map[0] == ("injection", 1)
        assert topo.row_map[4] == ("flow", 1, 2)
        assert topo.n_measurements == 7
        assert topo.n_states == 3

    def test_restricted_states_require_all_load_neighborhood(self):
        # only bus 4 has every neighbor (and itself) in the load class
        topo = build_topology(four_bus())
        assert topo.restricted_states == (topo.col_index[4],)

    def test_h_load_selects_load_injection_rows(self):
        topo = build_topology(four_bus())
        np.testing.assert_array_equal(topo.h_load, topo.h[[2, 3]])

    def test_restricted_override(self):
        topo = build_topology(four_bus(), restricted_override=[3, 4])
        assert topo.restricted_states == (topo.col_index[3], topo.col_index[4])

    def test_restricted_override_rejects_non_state_bus(self):
        with pytest.raises(StructuralError):
            build_topology(four_bus(), restricted_override=[1])
        with pytest.raises(StructuralError):
            build_topology(four_bus(), restricted_override=[99])

    def test_measure_is_h_times_theta(self):
        topo = build_topology(four_bus())
        theta = np.array([0.1, -0.2, 0.3])
        np.testing.assert_allclose(measure(topo, theta), topo.h @ theta)


class TestPowerFlow:
    def test_reduced_laplacian_three_bus(self):
        lap = reduced_laplacian(three_bus())
        np.testing.assert_array_equal(lap, [[6.0, -4.0], [-4.0, 4.0]])

    def test_dc_power_flow_hand_solution(self):
        # injections [1, -1] at buses 2, 3 give theta = [0, -0.25]
        theta = dc_power_flow(three_bus(), np.array([1.0, -1.0]))
        np.testing.assert_allclose(theta, [0.0, -0.25], atol=1e-14)

    def test_base_injections_are_negated_per_unit_loads(self):
        inj = base_injections(four_bus())
        np.testing.assert_allclose(inj, [0.0, -0.4, -0.6])

    def test_initial_state_solves_base_flow(self):
        net = four_bus()
        theta = initial_state(net)
        np.testing.assert_allclose(
            reduced_laplacian(net) @ theta, base_injections(net), atol=1e-12
        )

    def test_flow_balance_at_operating_point(self, network, topology):
        # every injection row reproduces the net flow out of its bus
        theta = initial_state(network)
        z = measure(topology, theta)
        n_bus = len(network.buses)
        flows = z[n_bus:]
        for i, bus in enumerate(network.buses):
            out = sum(
                flows[b] if br.from_bus == bus.bus_id else -flows[b]
                for b, br in enumerate(network.branches)
                if bus.bus_id in (br.from_bus, br.to_bus)
            )
            assert z[i] == pytest.approx(out, abs=1e-10)


class TestGeodesics:
    def test_path_graph_distances(self):
        dist = geodesic_distances(four_bus())
        expected = np.array(
            [[0, 1, 2, 3], [1, 0, 1, 2], [2, 1, 0, 1], [3, 2, 1, 0]]
        )
        np.testing.assert_array_equal(dist, expected)

    def test_state_distances_align_with_columns(self):
        topo = build_topology(four_bus())
        # bus 2 to bus 4 is two hops
        assert topo.state_distances[topo.col_index[2], topo.col_index[4]] == 2


class TestValidation:
    def test_duplicate_bus_ids(self):
        with pytest.raises(StructuralError):
            GridNetwork(
                buses=(Bus(1, "slack", 0.0), Bus(1, "load", 1.0)),
                branches=(),
                base_mva=100.0,
            )

    def test_exactly_one_slack(self):
        with pytest.raises(StructuralError):
            GridNetwork(
                buses=(Bus(1, "load", 1.0), Bus(2, "load", 1.0)),
                branches=(Branch(1, 2, 1.0),),
                base_mva=100.0,
            )
        with pytest.raises(StructuralError):
            GridNetwork(
                buses=(Bus(1, "slack", 0.0), Bus(2, "slack", 0.0)),
                branches=(Branch(1, 2, 1.0),),
                base_mva=100.0,
            )

    def test_positive_susceptance(self):
        with pytest.raises(StructuralError):
            GridNetwork(
                buses=(Bus(1, "slack", 0.0), Bus(2, "load", 1.0)),
                branches=(Branch(1, 2, -1.0),),
                base_mva=100.0,
            )

    def test_no_self_loops(self):
        with pytest.raises(StructuralError):
            GridNetwork(
                buses=(Bus(1, "slack", 0.0), Bus(2, "load", 1.0)),
                branches=(Branch(1, 2, 1.0), Branch(2, 2, 1.0)),
                base_mva=100.0,
            )

    def test_connectivity_required(self):
        with pytest.raises(StructuralError):
            GridNetwork(
                buses=(Bus(1, "slack", 0.0), Bus(2, "load", 1.0), Bus(3, "load", 1.0)),
                branches=(Branch(1, 2, 1.0),),
                base_mva=100.0,
            )


MATPOWER_TEXT = """\
function mpc = case4
% four bus line, comments stripped
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0   0 0 0 1 1 0 135 1 1.05 0.95;
    2  2  0   0 0 0 1 1 0 135 1 1.05 0.95;
    3  1  40  0 0 0 1 1 0 135 1 1.05 0.95;
    4  1  0   0 0 0 1 1 0 135 1 1.05 0.95;
];
mpc.gen = [
    2  0 0 10 -10 1 100 1 50 0;
];
mpc.branch = [
    1 2 0.0 1.0  0 0 0 0 0 0 1 -360 360;
    2 3 0.0 0.5  0 0 0 0 0 0 1 -360 360;
    3 4 0.0 0.2  0 0 0 0 0 0 1 -360 360;
];
"""


class TestParsers:
    def test_matpower_classes_and_susceptances(self):
        net = parse_case_file(MATPOWER_TEXT)
        classes = {b.bus_id: b.bus_class for b in net.buses}
        assert classes == {1: "slack", 2: "generator", 3: "load", 4: "zero_load"}
        assert net.base_mva == 100.0
        np.testing.assert_allclose(
            [br.susceptance for br in net.branches], [1.0, 2.0, 5.0]
        )

    def test_matpower_bad_row_reports_line(self):
        bad = MATPOWER_TEXT.replace("2 3 0.0 0.5", "2 3 0.0 oops")
        with pytest.raises(CaseParseError) as err:
            parse_case_file(bad)
        assert err.value.line_no is not None

    def test_matpower_unclosed_matrix(self):
        truncated = MATPOWER_TEXT[: MATPOWER_TEXT.index("mpc.gen")]
        with pytest.raises(CaseParseError, match="never closed"):
            parse_case_file(truncated.replace("];", "", 1))

    def test_matpower_missing_base_mva(self):
        with pytest.raises(CaseParseError, match="baseMVA"):
            parse_case_file("mpc.bus = [ 1 3 0 ];\nmpc.branch = [ 1 2 0 1 ];")

    def test_json_round_trip(self):
        net = four_bus()
        again = parse_case_file(network_to_json(net))
        assert again == net

    def test_json_invalid_reports_error(self):
        with pytest.raises(CaseParseError):
            parse_case_file("{ not json }")

    def test_json_missing_field(self):
        with pytest.raises(CaseParseError):
            parse_case_file('{"buses": [], "branches": []}')


class TestBundledCase:
    def test_load_case_from_path(self):
        net = load_case(case_path("ieee30"))
        assert len(net.buses) == 30

    def test_dimensions(self, network, topology):
        assert len(network.buses) == 30
        assert len(network.branches) == 41
        assert topology.h.shape == (71, 29)
        assert len(topology.load_rows) == 19

    def test_slack_column_removed(self, network, topology):
        assert network.slack_bus == 1
        assert 1 not in topology.col_map

    def test_restricted_buses(self, topology):
        buses = sorted(topology.col_map[j] for j in topology.restricted_states)
        assert buses == [14, 16, 17, 18, 19, 20]

    def test_injection_rows_sum_against_branch_stubs(self, network, topology):
        # each state column sums to zero over the injection rows it touches
        n_bus = len(network.buses)
        col_sums = topology.h[:n_bus].sum(axis=0)
        np.testing.assert_allclose(col_sums, np.zeros(29), atol=1e-12)
