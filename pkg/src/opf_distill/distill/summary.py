"""Where the selected features sit on the feeder."""

from typing import Dict, List, Literal, Sequence

from pydantic import BaseModel, ConfigDict

from opf_distill.domain.models import DistillationMap, FeatureInfo, FeatureKind, Method
from opf_distill.exceptions import CompatibilityError

Coverage = Literal["p", "q", "both"]


class SelectedFeature(BaseModel):
    model_config = ConfigDict(frozen=True)

    index: int
    feature_id: str
    kind: FeatureKind
    bus: int


class SelectionSummary(BaseModel):
    """
    Feature-location report of a map.

    Attributes:
        method: Method of the map
        k: Selected feature count
        features: Every selected feature with its bus and kind
        buses: Per selected bus, which of its injections are kept
    """

    model_config = ConfigDict(frozen=True)

    method: Method
    k: int
    features: List[SelectedFeature]
    buses: Dict[int, Coverage]


def selection_summary(dist_map: DistillationMap, features: Sequence[FeatureInfo]) -> SelectionSummary:
    """
    Summarize the selection of a map.

    PCA maps select nothing and give an empty summary.

    Raises:
        CompatibilityError: If the map and the feature list disagree on P
    """
    if len(features) != dist_map.p:
        raise CompatibilityError(f"map has P={dist_map.p} but {len(features)} features were given")

    selected = [
        SelectedFeature(index=i, feature_id=features[i].feature_id, kind=features[i].kind, bus=features[i].bus)
        for i in dist_map.selected_indices
    ]
    kinds: Dict[int, set] = {}
    for feature in selected:
        kinds.setdefault(feature.bus, set()).add(feature.kind)

    buses: Dict[int, Coverage] = {}
    for bus in sorted(kinds):
        if len(kinds[bus]) == 2:
            buses[bus] = "both"
        elif FeatureKind.P_NET in kinds[bus]:
            buses[bus] = "p"
        else:
            buses[bus] = "q"
    return SelectionSummary(method=dist_map.method, k=dist_map.k, features=selected, buses=buses)
