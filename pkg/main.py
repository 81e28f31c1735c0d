from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from app.retrieval.routes import router as retrieval_router
from app.llmgen.templates import all_templates
import uvicorn

app = FastAPI(
    title="FADER Retrieval API",
    description="Budgeted BM25 search over entity-description knowledge bases",
    version="0.1.0"
)

@app.on_event("startup")
async def startup_event():
    """Fail fast on broken prompt assets"""
    all_templates()


app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(retrieval_router)

@app.get("/")
async def root():
    return {"message": "FADER Retrieval API is running"}

@app.get("/health")
async def health_check():
    return {"status": "healthy"}

if __name__ == "__main__":
    uvicorn.run(app, host="0.0.0.0", port=8001)
