import pytest

from shadowpatch.lang import parse_program

SAMPLE_APP = """\
handler get_user {
  let u = db.get(param("id"));
  let n = u.name;
  return 200, n;
}

handler health {
  return 200, "ok";
}
"""


@pytest.fixture
def sample_program():
    return parse_program(SAMPLE_APP)


@pytest.fixture
def sample_store():
    from shadowpatch.store import KeyValueStore

    return KeyValueStore({"ada": {"name": "Ada"}, "bea": {"name": "Bea"}})
