from adaptive_sensing.seeding import MASK64, derive_seed, episode_seed, splitmix64, uniform


def test_splitmix64_reference_values():
    # first outputs of the reference splitmix64 generator seeded with 0
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_episode_seed_definition():
    for master in (0, 1, 2**63, MASK64):
        for i in range(5):
            assert episode_seed(master, i) == splitmix64((splitmix64(master) + i) & MASK64)


def test_neighbouring_masters_do_not_share_streams():
    a = {episode_seed(0, i) for i in range(1000)}
    b = {episode_seed(1, i) for i in range(1000)}
    assert not a & b


def test_derive_seed_distinct_tags():
    seeds = {derive_seed(7, tag, t) for tag in range(1, 8) for t in range(50)}
    assert len(seeds) == 7 * 50


def test_uniform_range():
    vals = [uniform(s) for s in range(10_000)]
    assert min(vals) >= 0.0 and max(vals) < 1.0
    assert abs(sum(vals) / len(vals) - 0.5) < 0.01
