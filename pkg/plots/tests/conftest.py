import pytest

HEADER = ("problem,dim,degree,upsilon,hausdorff_estimate,level,h_max,"
          "ndofs,l2_error,h1_error,h1_semi_error,solver_iterations,"
          "wall_time_s,error")


def study_row(degree, upsilon, level, l2, h1, error=""):
    h = 2.0 ** -level
    return (f"laplace2d,2,{degree},{upsilon},{1.2 * upsilon},{level},{h},"
            f"{100 * 4 ** level},{l2},{h1},{h1},17,0.5,{error}")


def write_study_csv(path, rows):
    path.write_text(HEADER + "\n" + "".join(r + "\n" for r in rows))
    return str(path)


@pytest.fixture
def typical_csv(tmp_path):
    """Two degrees, five amplitudes, three levels of synthetic data."""
    rows = []
    for degree in (1, 2):
        for upsilon in (0.0, 0.0125, 0.025, 0.05, 0.1):
            for level in (3, 4, 5):
                h = 2.0 ** -level
                l2 = h ** (degree + 1) + 0.5 * upsilon
                h1 = h ** degree + 0.5 * upsilon
                rows.append(study_row(degree, upsilon, level, l2, h1))
    return write_study_csv(tmp_path / "study.csv", rows)
