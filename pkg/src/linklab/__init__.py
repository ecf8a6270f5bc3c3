"""linklab: recover and predict type labels for issue-tracker links."""

__version__ = "0.1.0"

from linklab.dataset import (
    Issue,
    IssueLink,
    LabelFilterPolicy,
    ProjectDataset,
    filter_labels,
    label_distribution,
    linked_issue_ratio,
    validate_dataset,
)

__all__ = [
    "Issue",
    "IssueLink",
    "LabelFilterPolicy",
    "ProjectDataset",
    "filter_labels",
    "label_distribution",
    "linked_issue_ratio",
    "validate_dataset",
    "__version__",
]
