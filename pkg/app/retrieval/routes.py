"""
Retrieval routes: budgeted BM25 search over a built index
"""
from fastapi import APIRouter, HTTPException, status

from app.core.errors import ConfigurationError
from app.database.datastore import get_datastore, log_error
from .schemas import SearchHit, SearchRequest, SearchResponse
from .utils import index_key, load_scoped_indexes, load_units, render_context, retrieve_under_budget

router = APIRouter(prefix="/v1/retrieval", tags=["retrieval"])


@router.post("/search", response_model=SearchResponse)
async def search(request: SearchRequest) -> SearchResponse:
    """
    Rank a label's units for a query and return the prefix that fits the budget.

    Args:
        request: Index label, query, budget and (for per-document indexes) the doc_id

    Returns:
        SearchResponse: Selected units in rank order and the rendered context

    Raises:
        HTTPException: 404 for an unknown label or document, 400 for a missing doc_id
    """
    try:
        store = get_datastore()
        index_path = store.path("index", f"{request.label}.json")
        units_path = store.path("index", f"{request.label}_units.jsonl")
        if not index_path.exists() or not units_path.exists():
            raise HTTPException(
                status_code=status.HTTP_404_NOT_FOUND,
                detail=f"No index for label {request.label}; run `fader index` first",
            )

        scope, indexes = load_scoped_indexes(index_path)
        if scope == "document" and not request.doc_id:
            raise HTTPException(
                status_code=status.HTTP_400_BAD_REQUEST,
                detail="doc_id is required for per-document indexes",
            )
        key = index_key(scope, request.doc_id or "")
        if key not in indexes:
            raise HTTPException(
                status_code=status.HTTP_404_NOT_FOUND,
                detail=f"No units indexed for document {request.doc_id}",
            )

        units = [unit for unit in load_units(units_path) if index_key(scope, unit.doc_id) == key]
        ranked = retrieve_under_budget(indexes[key], units, request.query, request.budget)
        scores = dict(ranked.hits)
        by_id = {unit.unit_id: unit for unit in units}
        return SearchResponse(
            label=request.label,
            query=request.query,
            budget=request.budget,
            used_tokens=ranked.used_tokens,
            hits=[
                SearchHit(
                    unit_id=unit_id,
                    score=scores[unit_id],
                    text=by_id[unit_id].text,
                    token_count=by_id[unit_id].token_count,
                )
                for unit_id in ranked.selected
            ],
            context=render_context(ranked, units),
        )

    except HTTPException:
        raise
    except ConfigurationError as e:
        raise HTTPException(status_code=status.HTTP_409_CONFLICT, detail=str(e))
    except Exception as e:
        await log_error(
            error=e,
            location="retrieval/routes.py - search",
            additional_info={"label": request.label, "budget": request.budget},
        )
        raise HTTPException(
            status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
            detail=f"Search failed: {str(e)}",
        )


@router.get("/health")
async def health_check():
    return {"status": "healthy", "service": "retrieval", "workdir": str(get_datastore().workdir)}
